#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "clinctx/decimal.hpp"
#include "clinctx/time.hpp"
#include "clinctx/timeline.hpp"

// Line-delimited session logs: written by the chat service, read by the
// metrics monitor, the claim verifier and the task categorizer.
namespace clinctx::logs {

enum class Thumbs { kUp, kDown };
std::string_view to_string(Thumbs t);
std::optional<Thumbs> thumbs_from_string(std::string_view s);

struct Feedback {
  Thumbs thumbs = Thumbs::kUp;
  std::optional<std::string> note;
  Timestamp at{};

  bool operator==(const Feedback&) const = default;
};

struct TurnRecord {
  int turn_index = 0;
  Timestamp at{};
  std::string query;
  std::string response;  // empty when the turn failed
  std::string model;
  std::string mode;  // "single" | "map_reduce"
  std::size_t chunk_count = 0;
  std::int64_t latency_assembly_ms = 0;
  std::int64_t latency_inference_ms = 0;
  std::int64_t tokens_sent = 0;
  std::int64_t tokens_received = 0;
  Decimal cost;
  std::optional<std::string> error;  // gateway error code
  std::optional<Feedback> feedback;

  std::int64_t latency_ms() const { return latency_assembly_ms + latency_inference_ms; }
  bool operator==(const TurnRecord&) const = default;
};

struct SessionLog {
  std::string session_id;
  std::string user_id;
  std::string department;
  std::string patient_id;
  timeline::ContextSelection selection;
  Timestamp created_at{};
  std::int64_t context_assembly_ms = 0;
  std::int64_t context_tokens = 0;
  std::string context_text;
  std::vector<TurnRecord> turns;

  bool operator==(const SessionLog&) const = default;
};

std::string to_json_line(const SessionLog& log);  // no trailing newline
std::string turn_to_json(const TurnRecord& turn);
// Throws Error(kMalformedLog).
SessionLog parse_session_log(std::string_view line);
// Blank lines skipped; errors name the 1-based line.
std::vector<SessionLog> parse_session_logs(std::string_view jsonl);
// Every *.jsonl file in the directory, files in name order.
std::vector<SessionLog> load_log_directory(const std::filesystem::path& dir);

}  // namespace clinctx::logs
