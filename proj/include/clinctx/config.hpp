#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "clinctx/backend.hpp"
#include "clinctx/context.hpp"
#include "clinctx/gateway.hpp"
#include "clinctx/time.hpp"

namespace clinctx::config {

// Backend roles a config may fill. Missing roles get the offline default:
// chat/automation -> extractive, entailment -> containment,
// claim_classifier -> keyword, task_normalizer -> rule, linguistic -> rule.
inline constexpr const char* kRoles[] = {"chat",          "automation",      "entailment",
                                         "claim_classifier", "task_normalizer", "linguistic"};

struct BackendSpec {
  std::string type;  // scripted | http | extractive | containment | keyword | rule
  std::filesystem::path fixture;  // scripted
  std::string url;                // http
  std::string token_env;          // http
  std::int64_t timeout_s = 120;   // http
  std::int64_t latency_ms = 0;
  std::size_t sentences = 2;                     // extractive
  std::vector<std::string> inaccuracy_markers;   // keyword
  int risk_level = 3;                            // keyword

  bool operator==(const BackendSpec&) const = default;
};

struct Paths {
  std::filesystem::path patients;
  std::filesystem::path logs;
  std::filesystem::path automations;
  std::filesystem::path gold;
  std::filesystem::path jobs;
  std::filesystem::path snapshots;
  std::filesystem::path worklists;
  std::filesystem::path feedback;
  std::filesystem::path reports;
};

// JSON file:
// {"seed": 7, "parallelism": 4, "output_reserve": 8192,
//  "tokenizer": {"rule": "chars_div"|"whitespace_words", "divisor": 4},
//  "models": [{"name", "window_tokens", "input_price_per_1k", "output_price_per_1k",
//              "throughput_tokens_per_min"?, "tags"?}],
//  "backends": {"<role>": {"type": ..., ...}},
//  "embedding": {"dimension": 256},
//  "paths": {"patients": "...", ...},
//  "clock": {"start": "2025-09-08T08:00:00Z", "step_ms": 1000} | {"system": true},
//  "chat": {"system_prompt_file"?, "preferred_model"?}}
// Relative paths resolve against the config file's directory.
struct PlatformConfig {
  std::filesystem::path base_dir;
  std::uint64_t seed = 0;
  std::size_t parallelism = 4;
  std::int64_t output_reserve = context::kDefaultOutputReserve;
  context::TokenizerSpec tokenizer;
  std::vector<gateway::ModelProfile> models;
  std::map<std::string, BackendSpec> backends;
  std::size_t embedding_dimension = 256;
  Paths paths;
  bool system_clock = false;
  Timestamp clock_start{};
  std::int64_t clock_step_ms = 1000;
  std::optional<std::filesystem::path> chat_system_prompt_file;
  std::optional<std::string> preferred_model;

  const BackendSpec& backend(const std::string& role) const;
};

// Throws Error(kConfigError) on bad structure, unknown roles or types, and
// referenced fixture files that do not exist.
PlatformConfig parse_config(const std::string& json_text, const std::filesystem::path& base_dir);
PlatformConfig load_config(const std::filesystem::path& path);

// `flag` when given, else $CLINCTX_CONFIG. Throws Error(kConfigError) when neither is set.
std::filesystem::path resolve_config_path(const std::optional<std::string>& flag);

// "rule" means RuleTaskNormalizer for task_normalizer and
// RuleLinguisticClassifier for linguistic.
std::unique_ptr<gateway::TextBackend> make_backend(const std::string& role, const BackendSpec& spec);

// Deterministic clock for the CLI: every call to now() returns the next step.
class SteppingClock final : public Clock {
 public:
  SteppingClock(Timestamp start, std::chrono::milliseconds step) : start_(start), step_(step) {}
  Timestamp now() override;

 private:
  std::mutex mu_;
  Timestamp start_;
  std::chrono::milliseconds step_;
  std::int64_t calls_ = 0;
};

std::unique_ptr<Clock> make_clock(const PlatformConfig& config);

}  // namespace clinctx::config
