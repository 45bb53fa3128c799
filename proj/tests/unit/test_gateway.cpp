#include <doctest.h>

#include <atomic>
#include <random>

#include "clinctx/gateway.hpp"
#include "clinctx/mock_backends.hpp"
#include "clinctx/text.hpp"

using namespace clinctx;
using namespace clinctx::gateway;

namespace {

ModelProfile model(std::string name, std::int64_t window, const char* in, const char* out = "0.01") {
  ModelProfile m;
  m.name = std::move(name);
  m.window_tokens = window;
  m.input_price_per_1k = Decimal::parse(in);
  m.output_price_per_1k = Decimal::parse(out);
  return m;
}

// Answer derived only from the request, so any ordering bug shows up in the result.
class DigestBackend final : public TextBackend {
 public:
  Completion complete(const std::string&, const std::string& user) override {
    ++calls;
    return {text::sha256_hex(user).substr(0, 12), std::nullopt, std::int64_t(3), std::int64_t(user.size() % 97)};
  }
  std::atomic<int> calls{0};
};

class FlakyOnce final : public TextBackend {
 public:
  Completion complete(const std::string&, const std::string& user) override {
    if (!failed_.exchange(true)) throw BackendError("timeout", "first call", 50);
    return {"ok:" + std::to_string(user.size()), {}, {}, 10};
  }

 private:
  std::atomic<bool> failed_{false};
};

}  // namespace

TEST_CASE("routing picks the smallest fitting window, cheaper on ties") {
  auto tok = context::TokenizerSpec::chars_div(4);
  ModelRegistry reg({model("small", 8192, "0.001"), model("big-b", 128000, "0.003"),
                     model("big-a", 128000, "0.003"), model("big-c", 128000, "0.002"), model("huge", 1000000, "0.01")});
  auto small = context::build_context(std::string(100, 'x'), "q", "", tok);
  CHECK(route(small, reg, 1000, tok).model.name == "small");
  auto medium = context::build_context(std::string(40000, 'x'), "q", "", tok);
  CHECK(route(medium, reg, 1000, tok).model.name == "big-c");
  reg.remove("big-c");
  CHECK(route(medium, reg, 1000, tok).model.name == "big-a");
  auto large = context::build_context(std::string(2'000'000, 'x'), "q", "", tok);
  auto d = route(large, reg, 1000, tok);
  CHECK(d.model.name == "huge");
  CHECK(d.plan.mode == context::FanoutMode::kSingle);
  auto too_large = context::build_context(std::string(8'000'000, 'x'), "q", "", tok);
  d = route(too_large, reg, 1000, tok);
  CHECK(d.model.name == "huge");
  CHECK(d.plan.mode == context::FanoutMode::kMapReduce);
  CHECK(d.plan.chunks.size() == 3);
  CHECK_THROWS_AS(route(small, ModelRegistry{}, 1000, tok), Error);
}

TEST_CASE("boundary: total plus reserve equal to the window fits") {
  auto tok = context::TokenizerSpec::chars_div(1);
  ModelRegistry reg({model("exact", 1100, "0.001"), model("larger", 5000, "0.001")});
  auto pkg = context::build_context(std::string(99, 'x'), "q", "", tok);
  CHECK(route(pkg, reg, 1000, tok).model.name == "exact");
  pkg = context::build_context(std::string(100, 'x'), "q", "", tok);
  CHECK(route(pkg, reg, 1000, tok).model.name == "larger");
}

TEST_CASE("cost arithmetic") {
  auto m = model("m", 1000, "0.0025", "0.01");
  RequestTelemetry t{"r", "m", 0, 1234, 567, std::nullopt, {}};
  // 1234 * 0.0025 / 1000 + 567 * 0.01 / 1000 = 0.003085 + 0.00567
  CHECK(cost(t, m).to_string() == "0.008755");
  t.tokens_sent = 1;
  t.tokens_received = 0;
  m.input_price_per_1k = Decimal::parse("0.0005");
  // 0.0000005 rounds half-up to 0.000001
  CHECK(cost(t, m).to_string() == "0.000001");
  t.model = "other";
  CHECK_THROWS_AS(cost(t, m), Error);
  CHECK_THROWS_AS(model("bad", 0, "0.1").validate(), Error);
  CHECK_THROWS_AS(model("bad", 10, "-0.1").validate(), Error);
}

TEST_CASE("map-reduce result is independent of completion order") {
  auto tok = context::TokenizerSpec::chars_div(4);
  std::mt19937_64 rng(5);
  std::string record;
  for (int i = 0; i < 30000; ++i) record += char('a' + rng() % 26);
  auto pkg = context::build_context(record, "Summarize.", "sys", tok);
  auto plan = context::plan_fanout(pkg, 3000, 500, tok, "m");
  REQUIRE(plan.mode == context::FanoutMode::kMapReduce);
  DigestBackend base;
  auto reference = execute(plan, base, {.parallelism = 1, .profile = model("m", 3000, "0.001")});
  REQUIRE(reference.ok());
  CHECK(reference.telemetry.size() == plan.chunks.size() + 1);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    JitterBackend jitter(base, seed, 500);
    auto r = execute(plan, jitter, {.parallelism = 4, .profile = model("m", 3000, "0.001")});
    CHECK(r.response == reference.response);
    CHECK(r.telemetry == reference.telemetry);
    CHECK(r.latency_ms == reference.latency_ms);
  }
  // Latency is the slowest map chunk plus the reduce call.
  std::int64_t slowest = 0;
  for (std::size_t i = 0; i < plan.chunks.size(); ++i) slowest = std::max(slowest, reference.telemetry[i].latency_ms);
  CHECK(reference.latency_ms == slowest + reference.telemetry.back().latency_ms);
}

TEST_CASE("single mode sends the rendered content and records telemetry") {
  auto tok = context::TokenizerSpec::chars_div(4);
  auto pkg = context::build_context("record body", "what?", "sys", tok);
  auto plan = context::plan_fanout(pkg, 10000, 100, tok, "m");
  ScriptedBackend b({}, std::string("fine"), 250);
  TelemetryLog sink;
  auto r = execute(plan, b, {.request_prefix = "x", .profile = model("m", 10000, "0.001"), .sink = &sink});
  CHECK(r.response == std::optional<std::string>("fine"));
  REQUIRE(b.calls().size() == 1);
  CHECK(b.calls()[0].user_content == "record body\n\nwhat?");
  CHECK(b.calls()[0].system_prompt == "sys");
  CHECK(sink.size() == 1);
  CHECK(r.latency_ms == 250);
  CHECK(r.telemetry[0].request_id == "x");
}

TEST_CASE("a map chunk is retried once") {
  auto tok = context::TokenizerSpec::chars_div(1);
  auto pkg = context::build_context(std::string(3000, 'x'), "q", "", tok);
  auto plan = context::plan_fanout(pkg, 1500, 50, tok, "m");
  REQUIRE(plan.chunks.size() > 1);
  FlakyOnce b;
  auto r = execute(plan, b, {.parallelism = 1});
  CHECK(r.ok());
  CHECK(r.telemetry.size() == plan.chunks.size() + 2);
  CHECK(r.telemetry[0].error_code == std::optional<std::string>("timeout"));
}

TEST_CASE("backend failure surfaces an error code") {
  auto tok = context::TokenizerSpec::chars_div(4);
  auto pkg = context::build_context("r", "q", "", tok);
  auto plan = context::plan_fanout(pkg, 1000, 10, tok, "m");
  ScriptedBackend b;  // no rules, no default
  auto r = execute(plan, b);
  CHECK_FALSE(r.ok());
  CHECK(r.error_code == "no_script");
}

TEST_CASE("scripted backend rules") {
  auto b = ScriptedBackend::from_json(R"({
    "default": "dflt", "latency_ms": 7,
    "rules": [
      {"contains": ["alpha", "beta"], "response": "both"},
      {"contains": "alpha", "fail": "http_503", "times": 1},
      {"contains": "alpha", "response": "alpha only", "latency_ms": 9}
    ]})");
  CHECK(b.complete("", "alpha beta").text == "both");
  CHECK_THROWS_AS(b.complete("", "alpha"), BackendError);
  auto c = b.complete("", "alpha");
  CHECK(c.text == "alpha only");
  CHECK(c.latency_ms == std::optional<std::int64_t>(9));
  CHECK(b.complete("", "gamma").latency_ms == std::optional<std::int64_t>(7));
  CHECK(b.call_count() == 4);
  CHECK_THROWS_AS(ScriptedBackend::from_json("{"), Error);
}

TEST_CASE("extractive backend only repeats prose from the record") {
  ExtractiveBackend b(2, 5);
  std::string record =
      "[note | 2024-01-01T00:00:00Z | - | - | internal]\nPatient stable overnight. Afebrile.\nvalue: 3\n"
      "Plan to discharge tomorrow.";
  auto c = b.complete("", record + "\n\nUser: summarize");
  CHECK(c.text == "Patient stable overnight. Afebrile.");
  CHECK(b.complete("", "value: 3\n\nUser: q").text == "The record is empty.");
}

TEST_CASE("embedder is unit norm and deterministic") {
  TrigramHashEmbedder e(64);
  for (std::string s : {"", "a", "Heart failure with reduced ejection fraction"}) {
    auto v = e.embed(s);
    CHECK(v.size() == 64);
    double n = 0;
    for (double x : v) n += x * x;
    CHECK(n == doctest::Approx(1.0));
    CHECK(v == e.embed(s));
  }
}
