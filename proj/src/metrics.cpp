#include "clinctx/metrics.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <set>

#include "clinctx/error.hpp"
#include "clinctx/text.hpp"

namespace clinctx::metrics {
namespace {

using ojson = nlohmann::ordered_json;

std::string bar(double fraction, int width) {
  return std::string(static_cast<std::size_t>(std::lround(std::clamp(fraction, 0.0, 1.0) * width)), '#');
}

ojson histogram_json(const Histogram& h) {
  ojson bins = ojson::array();
  for (auto [b, c] : h.bins) bins.push_back(ojson{{"lower", h.lower_bound(b)}, {"count", c}});
  return ojson{{"metric", std::string(to_string(h.metric))}, {"bin_width", h.bin_width},
               {"total", h.total}, {"bins", bins}};
}

void render_histogram(std::string& out, const Histogram& h, std::string_view unit) {
  std::size_t peak = 0;
  for (auto [_, c] : h.bins) peak = std::max(peak, c);
  for (auto [b, c] : h.bins) {
    double lo = h.lower_bound(b);
    out += fmt::format("  {:>12} {:<4} | {:<40} {}\n", fmt::format("{:g}", lo), unit,
                       bar(peak ? static_cast<double>(c) / static_cast<double>(peak) : 0.0, 40), c);
  }
}

}  // namespace

std::string_view to_string(Metric m) { return m == Metric::kLatencySeconds ? "latency_s" : "tokens"; }

UsageSnapshot snapshot_of(const std::vector<logs::SessionLog>& sessions) {
  UsageSnapshot s;
  std::set<std::string> users;
  std::map<std::string, std::set<std::string>> day_users;
  struct WeekSets {
    std::set<std::string> users, patients;
    std::size_t sessions = 0;
  };
  std::map<std::string, WeekSets> weeks;
  std::map<std::string, std::set<std::string>> user_weeks;
  for (const auto& log : sessions) {
    ++s.sessions;
    users.insert(log.user_id);
    s.queries += log.turns.size();
    for (const auto& t : log.turns) s.total_tokens += t.tokens_sent + t.tokens_received;
    day_users[format_date(log.created_at)].insert(log.user_id);
    auto week = iso_week(log.created_at);
    auto& w = weeks[week];
    w.users.insert(log.user_id);
    w.patients.insert(log.patient_id);
    ++w.sessions;
    user_weeks[log.user_id].insert(week);
  }
  s.unique_users = users.size();
  for (const auto& [d, u] : day_users) s.daily_active[d] = u.size();
  for (const auto& [k, w] : weeks) s.weekly[k] = {w.users.size(), w.sessions, w.patients.size()};
  for (const auto& [_, ws] : user_weeks) {
    (ws.size() >= 2 ? s.retention.used_ge_2w : s.retention.used_1w)++;
  }
  return s;
}

Histogram histogram(const std::vector<double>& values, Metric metric, double bin_width) {
  if (!(bin_width > 0) || !std::isfinite(bin_width)) {
    throw Error(ErrorCode::kInvalidBinWidth, fmt::format("bin width {} must be positive", bin_width));
  }
  Histogram h;
  h.metric = metric;
  h.bin_width = bin_width;
  for (double v : values) {
    ++h.bins[static_cast<std::int64_t>(std::floor(v / bin_width))];
    ++h.total;
  }
  return h;
}

std::vector<double> turn_latencies_s(const std::vector<logs::SessionLog>& sessions) {
  std::vector<double> out;
  for (const auto& log : sessions) {
    for (const auto& t : log.turns) out.push_back(static_cast<double>(t.latency_ms()) / 1000.0);
  }
  return out;
}

std::vector<double> turn_tokens(const std::vector<logs::SessionLog>& sessions) {
  std::vector<double> out;
  for (const auto& log : sessions) {
    for (const auto& t : log.turns) out.push_back(static_cast<double>(t.tokens_sent));
  }
  return out;
}

std::string selection_key(const timeline::ContextSelection& selection) {
  if (selection.kinds.size() == timeline::kAllKinds.size()) return "all";
  std::string key;
  for (auto k : timeline::kAllKinds) {
    if (!selection.kinds.contains(k)) continue;
    if (!key.empty()) key += '+';
    key += timeline::to_string(k);
  }
  return key;
}

std::map<std::string, double> data_type_breakdown(const std::vector<logs::SessionLog>& sessions) {
  std::map<std::string, std::size_t> counts;
  for (const auto& log : sessions) ++counts[selection_key(log.selection)];
  std::map<std::string, double> out;
  for (const auto& [k, c] : counts) out[k] = static_cast<double>(c) / static_cast<double>(sessions.size());
  return out;
}

std::map<std::string, double> kind_usage(const std::vector<logs::SessionLog>& sessions) {
  std::map<std::string, double> out;
  if (sessions.empty()) return out;
  for (auto k : timeline::kAllKinds) {
    std::size_t n = 0;
    for (const auto& log : sessions) n += log.selection.kinds.contains(k) ? 1 : 0;
    out[std::string(timeline::to_string(k))] = static_cast<double>(n) / static_cast<double>(sessions.size());
  }
  return out;
}

ActivityShares activity_shares(const std::vector<logs::SessionLog>& sessions) {
  ActivityShares a;
  std::size_t multi = 0, turns = 0, fb = 0, up = 0, failed = 0;
  for (const auto& log : sessions) {
    if (log.turns.size() >= 2) ++multi;
    ++a.sessions_by_department[log.department.empty() ? "(unspecified)" : log.department];
    for (const auto& t : log.turns) {
      ++turns;
      if (t.error) ++failed;
      if (t.feedback) {
        ++fb;
        if (t.feedback->thumbs == logs::Thumbs::kUp) ++up;
      }
    }
  }
  auto frac = [](std::size_t a, std::size_t b) { return b ? static_cast<double>(a) / static_cast<double>(b) : 0.0; };
  a.multi_turn_sessions = frac(multi, sessions.size());
  a.feedback_turns = frac(fb, turns);
  a.positive_feedback = frac(up, fb);
  a.failed_turns = frac(failed, turns);
  return a;
}

void MetricsStore::ingest(logs::SessionLog log) {
  std::lock_guard lock(mu_);
  sessions_.push_back(std::move(log));
}

void MetricsStore::ingest_jsonl(std::string_view jsonl) {
  auto batch = logs::parse_session_logs(jsonl);
  std::lock_guard lock(mu_);
  std::move(batch.begin(), batch.end(), std::back_inserter(sessions_));
}

void MetricsStore::ingest_directory(const std::filesystem::path& dir) {
  auto batch = logs::load_log_directory(dir);
  std::lock_guard lock(mu_);
  std::move(batch.begin(), batch.end(), std::back_inserter(sessions_));
}

std::vector<logs::SessionLog> MetricsStore::sessions() const {
  std::lock_guard lock(mu_);
  return sessions_;
}

std::size_t MetricsStore::size() const {
  std::lock_guard lock(mu_);
  return sessions_.size();
}

UsageSnapshot MetricsStore::snapshot() const { return snapshot_of(sessions()); }

MetricsReport build_report(const std::vector<logs::SessionLog>& sessions, double latency_bin_s, double token_bin) {
  MetricsReport r;
  r.usage = snapshot_of(sessions);
  r.latency = histogram(turn_latencies_s(sessions), Metric::kLatencySeconds, latency_bin_s);
  r.tokens = histogram(turn_tokens(sessions), Metric::kTokens, token_bin);
  r.data_types = data_type_breakdown(sessions);
  r.kinds = kind_usage(sessions);
  r.activity = activity_shares(sessions);
  return r;
}

namespace {

ojson snapshot_json(const UsageSnapshot& s) {
  ojson j;
  j["unique_users"] = s.unique_users;
  j["sessions"] = s.sessions;
  j["queries"] = s.queries;
  j["total_tokens"] = s.total_tokens;
  j["daily_active"] = ojson::object();
  for (const auto& [d, n] : s.daily_active) j["daily_active"][d] = n;
  j["weekly"] = ojson::object();
  for (const auto& [w, u] : s.weekly) {
    j["weekly"][w] = ojson{{"users", u.users}, {"sessions", u.sessions}, {"unique_patients", u.unique_patients}};
  }
  j["retention"] = ojson{{"used_1w", s.retention.used_1w}, {"used_ge_2w", s.retention.used_ge_2w}};
  return j;
}

}  // namespace

std::string snapshot_to_json(const UsageSnapshot& s) { return snapshot_json(s).dump(2) + "\n"; }

std::string report_to_json(const MetricsReport& r) {
  ojson j;
  j["usage"] = snapshot_json(r.usage);
  j["latency_histogram"] = histogram_json(r.latency);
  j["token_histogram"] = histogram_json(r.tokens);
  j["data_types"] = ojson::object();
  for (const auto& [k, v] : r.data_types) j["data_types"][k] = v;
  j["kind_usage"] = ojson::object();
  for (const auto& [k, v] : r.kinds) j["kind_usage"][k] = v;
  ojson dept = ojson::object();
  for (const auto& [k, v] : r.activity.sessions_by_department) dept[k] = v;
  j["activity"] = ojson{{"multi_turn_sessions", r.activity.multi_turn_sessions},
                        {"feedback_turns", r.activity.feedback_turns},
                        {"positive_feedback", r.activity.positive_feedback},
                        {"failed_turns", r.activity.failed_turns},
                        {"sessions_by_department", dept}};
  return j.dump(2) + "\n";
}

std::string render_report_text(const MetricsReport& r) {
  const auto& u = r.usage;
  std::string out = fmt::format("users: {}  sessions: {}  queries: {}  tokens: {}\n", text::group_thousands(static_cast<std::int64_t>(u.unique_users)),
                                text::group_thousands(static_cast<std::int64_t>(u.sessions)),
                                text::group_thousands(static_cast<std::int64_t>(u.queries)),
                                text::group_thousands(u.total_tokens));
  out += fmt::format("retention: used 1w {}, used >= 2w {}\n", u.retention.used_1w, u.retention.used_ge_2w);
  out += fmt::format("multi-turn sessions: {}  feedback on turns: {}  positive feedback: {}  failed turns: {}\n",
                     text::format_percent(r.activity.multi_turn_sessions, 1),
                     text::format_percent(r.activity.feedback_turns, 1),
                     text::format_percent(r.activity.positive_feedback, 1),
                     text::format_percent(r.activity.failed_turns, 1));
  out += "\nweekly activity (users / sessions / patients)\n";
  for (const auto& [w, v] : u.weekly) out += fmt::format("  {}  {:>5} {:>6} {:>6}\n", w, v.users, v.sessions, v.unique_patients);
  out += fmt::format("\nresponse latency, {:g} s bins\n", r.latency.bin_width);
  render_histogram(out, r.latency, "s");
  out += fmt::format("\ntokens sent per query, {:g} token bins\n", r.tokens.bin_width);
  render_histogram(out, r.tokens, "tok");
  out += "\ndata types selected (share of sessions)\n";
  for (const auto& [k, v] : r.data_types) out += fmt::format("  {:>6}  {}\n", text::format_percent(v, 1), k);
  out += "\nsessions using each data type\n";
  for (const auto& [k, v] : r.kinds) out += fmt::format("  {:>6}  {}\n", text::format_percent(v, 1), k);
  out += "\nsessions by department\n";
  for (const auto& [k, v] : r.activity.sessions_by_department) out += fmt::format("  {:>6}  {}\n", v, k);
  return out;
}

}  // namespace clinctx::metrics
