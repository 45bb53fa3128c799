#include <doctest.h>

#include "clinctx/metrics.hpp"
#include "clinctx/session_log.hpp"
#include "clinctx/synth.hpp"
#include "clinctx/time.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace clinctx;

namespace {

std::vector<logs::SessionLog> corpus(std::size_t n, std::uint64_t seed) {
  synth::LogOptions o;
  o.sessions = n;
  o.seed = seed;
  return synth::generate_session_logs(o);
}

}  // namespace

TEST_CASE("iso week agrees with the calendar oracle") {
  auto t = parse_timestamp("2019-12-20");
  for (int d = 0; d < 3000; ++d) {
    auto ts = t + std::chrono::days(d);
    REQUIRE(iso_week(ts) == testsupport::iso_week_oracle(ts));
  }
}

TEST_CASE("snapshot equals brute force") {
  auto sessions = corpus(1500, 2);
  auto s = metrics::snapshot_of(sessions);
  CHECK(s == testsupport::snapshot_oracle(sessions));
  CHECK(s.retention.used_1w + s.retention.used_ge_2w == s.unique_users);
}

TEST_CASE("histograms and breakdowns equal brute force") {
  auto sessions = corpus(800, 5);
  for (double w : {0.5, 10.0, 37.5}) {
    auto lat = metrics::turn_latencies_s(sessions);
    auto h = metrics::histogram(lat, metrics::Metric::kLatencySeconds, w);
    CHECK(h.bins == testsupport::histogram_oracle(lat, w));
    CHECK(h.total == lat.size());
  }
  auto tok = metrics::turn_tokens(sessions);
  CHECK(metrics::histogram(tok, metrics::Metric::kTokens, 40000).bins == testsupport::histogram_oracle(tok, 40000));
  CHECK(metrics::data_type_breakdown(sessions) == testsupport::breakdown_oracle(sessions));
  double total = 0;
  for (auto& [_, v] : metrics::data_type_breakdown(sessions)) total += v;
  CHECK(total == doctest::Approx(1.0));
  CHECK_THROWS_AS(metrics::histogram(tok, metrics::Metric::kTokens, 0), Error);
  CHECK_THROWS_AS(metrics::histogram(tok, metrics::Metric::kTokens, -1), Error);
}

TEST_CASE("session logs round trip through jsonl") {
  auto sessions = corpus(300, 9);
  std::string jsonl;
  for (const auto& s : sessions) jsonl += logs::to_json_line(s) + "\n";
  auto back = logs::parse_session_logs(jsonl);
  CHECK(back == sessions);
  metrics::MetricsStore store;
  store.ingest_jsonl(jsonl);
  CHECK(store.snapshot() == metrics::snapshot_of(sessions));
}

TEST_CASE("bad batches ingest nothing") {
  metrics::MetricsStore store;
  auto sessions = corpus(3, 1);
  std::string jsonl = logs::to_json_line(sessions[0]) + "\n{broken\n";
  CHECK_THROWS_AS(store.ingest_jsonl(jsonl), Error);
  CHECK(store.size() == 0);
  try {
    logs::parse_session_logs(jsonl);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kMalformedLog);
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
}

TEST_CASE("log directory loads files in name order") {
  testsupport::TempDir dir("logs");
  auto sessions = corpus(4, 4);
  testsupport::write_file(dir.path() / "b.jsonl", logs::to_json_line(sessions[2]) + "\n" + logs::to_json_line(sessions[3]));
  testsupport::write_file(dir.path() / "a.jsonl", logs::to_json_line(sessions[0]) + "\n" + logs::to_json_line(sessions[1]) + "\n");
  testsupport::write_file(dir.path() / "notes.txt", "ignored");
  CHECK(logs::load_log_directory(dir.path()) == sessions);
}

TEST_CASE("report json is stable") {
  auto sessions = corpus(200, 6);
  auto a = metrics::report_to_json(metrics::build_report(sessions));
  CHECK(a == metrics::report_to_json(metrics::build_report(sessions)));
  CHECK(metrics::selection_key(timeline::ContextSelection::everything("p")) == "all");
  timeline::ContextSelection sel{"p", {timeline::ResourceKind::kLabResult, timeline::ResourceKind::kNote}, {}, {}};
  CHECK(metrics::selection_key(sel) == "note+lab_result");
}
