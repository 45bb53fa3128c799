#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "clinctx/session_log.hpp"

namespace clinctx::metrics {

inline constexpr double kDefaultLatencyBinSeconds = 10.0;
inline constexpr double kDefaultTokenBin = 40000.0;

struct WeekUsage {
  std::size_t users = 0;
  std::size_t sessions = 0;
  std::size_t unique_patients = 0;

  bool operator==(const WeekUsage&) const = default;
};

struct Retention {
  std::size_t used_1w = 0;
  std::size_t used_ge_2w = 0;

  bool operator==(const Retention&) const = default;
};

// Activity is attributed to the session's creation time; weeks are ISO
// weeks in UTC ("2025-W37"), days are UTC dates.
struct UsageSnapshot {
  std::size_t unique_users = 0;
  std::size_t sessions = 0;
  std::size_t queries = 0;
  std::int64_t total_tokens = 0;  // sent + received over every turn
  std::map<std::string, std::size_t> daily_active;
  std::map<std::string, WeekUsage> weekly;
  Retention retention;

  bool operator==(const UsageSnapshot&) const = default;
};

UsageSnapshot snapshot_of(const std::vector<logs::SessionLog>& sessions);

enum class Metric { kLatencySeconds, kTokens };
std::string_view to_string(Metric m);

struct Histogram {
  Metric metric = Metric::kLatencySeconds;
  double bin_width = 0;
  std::map<std::int64_t, std::size_t> bins;  // floor(v / width) -> count
  std::size_t total = 0;

  double lower_bound(std::int64_t bin) const { return static_cast<double>(bin) * bin_width; }
  bool operator==(const Histogram&) const = default;
};

// Throws Error(kInvalidBinWidth) unless bin_width > 0.
Histogram histogram(const std::vector<double>& values, Metric metric, double bin_width);

// Per turn: assembly + inference latency in seconds, and tokens sent.
std::vector<double> turn_latencies_s(const std::vector<logs::SessionLog>& sessions);
std::vector<double> turn_tokens(const std::vector<logs::SessionLog>& sessions);

// Key "all" when every kind was selected, otherwise the selected kind names
// joined with "+" in kind order. Values are session fractions.
std::string selection_key(const timeline::ContextSelection& selection);
std::map<std::string, double> data_type_breakdown(const std::vector<logs::SessionLog>& sessions);
// Share of sessions whose selection includes each kind.
std::map<std::string, double> kind_usage(const std::vector<logs::SessionLog>& sessions);

struct ActivityShares {
  double multi_turn_sessions = 0;  // sessions with two or more turns
  double feedback_turns = 0;       // turns carrying feedback
  double positive_feedback = 0;    // thumbs up among feedback
  double failed_turns = 0;
  std::map<std::string, std::size_t> sessions_by_department;
};
ActivityShares activity_shares(const std::vector<logs::SessionLog>& sessions);

// Append-only store; snapshots work on a copy taken under the lock.
class MetricsStore {
 public:
  void ingest(logs::SessionLog log);
  // Throws Error(kMalformedLog); nothing is ingested from a bad batch.
  void ingest_jsonl(std::string_view jsonl);
  void ingest_directory(const std::filesystem::path& dir);

  std::vector<logs::SessionLog> sessions() const;
  std::size_t size() const;
  UsageSnapshot snapshot() const;

 private:
  mutable std::mutex mu_;
  std::vector<logs::SessionLog> sessions_;
};

struct MetricsReport {
  UsageSnapshot usage;
  Histogram latency;
  Histogram tokens;
  std::map<std::string, double> data_types;
  std::map<std::string, double> kinds;
  ActivityShares activity;
};

MetricsReport build_report(const std::vector<logs::SessionLog>& sessions,
                           double latency_bin_s = kDefaultLatencyBinSeconds,
                           double token_bin = kDefaultTokenBin);
std::string snapshot_to_json(const UsageSnapshot& s);
std::string report_to_json(const MetricsReport& r);
std::string render_report_text(const MetricsReport& r);

}  // namespace clinctx::metrics
