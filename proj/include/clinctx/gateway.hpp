#pragma once

#include <cstddef>
#include <cstdint>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include "clinctx/backend.hpp"
#include "clinctx/context.hpp"
#include "clinctx/decimal.hpp"

namespace clinctx::gateway {

struct ModelProfile {
  std::string name;
  std::int64_t window_tokens = 0;
  Decimal input_price_per_1k;
  Decimal output_price_per_1k;
  std::optional<std::int64_t> throughput_tokens_per_min;  // recorded, not scheduled on
  std::set<std::string> tags;

  // Throws Error(kInvalidParams) on a non-positive window or negative price.
  void validate() const;
  bool operator==(const ModelProfile&) const = default;
};

// Read-mostly; updates take an exclusive lock.
class ModelRegistry {
 public:
  ModelRegistry() = default;
  explicit ModelRegistry(std::vector<ModelProfile> models);

  // Replaces any profile with the same name.
  void add(ModelProfile profile);
  bool remove(const std::string& name);
  std::optional<ModelProfile> find(const std::string& name) const;
  // Sorted by name.
  std::vector<ModelProfile> list() const;
  std::size_t size() const;
  bool empty() const { return size() == 0; }

 private:
  mutable std::shared_mutex mu_;
  std::vector<ModelProfile> models_;
};

struct RequestTelemetry {
  std::string request_id;
  std::string model;
  std::int64_t latency_ms = 0;
  std::int64_t tokens_sent = 0;
  std::int64_t tokens_received = 0;
  std::optional<std::string> error_code;
  Decimal cost;

  bool operator==(const RequestTelemetry&) const = default;
};

// Append-only sink shared by concurrent writers.
class TelemetryLog {
 public:
  void append(const RequestTelemetry& record);
  void append(const std::vector<RequestTelemetry>& records);
  std::vector<RequestTelemetry> snapshot() const;
  std::size_t size() const;

 private:
  mutable std::mutex mu_;
  std::vector<RequestTelemetry> records_;
};

// tokens_sent / 1000 * input price + tokens_received / 1000 * output price,
// rounded half-up to six decimal places. Throws Error(kProfileMismatch) when
// the telemetry names a different model.
Decimal cost(const RequestTelemetry& telemetry, const ModelProfile& profile);

struct RouteDecision {
  ModelProfile model;
  context::FanoutPlan plan;
};

// Smallest window with total + reserve <= window; ties by lower input price,
// then by name. When nothing fits, the largest window (same tie-break) with a
// map_reduce plan. Throws Error(kEmptyRegistry).
RouteDecision route(const context::ContextPackage& pkg, const ModelRegistry& registry,
                    std::int64_t output_reserve, const context::TokenizerSpec& tokenizer);

struct ExecuteOptions {
  std::size_t parallelism = 4;
  std::string request_prefix = "req";
  // Prices the telemetry when set.
  std::optional<ModelProfile> profile;
  TelemetryLog* sink = nullptr;
  std::size_t max_reduce_depth = 8;
};

struct ExecutionResult {
  std::optional<std::string> response;
  std::string error_code;
  std::string error_message;
  // Ordered: map requests by (chunk index, attempt), then reduce requests.
  std::vector<RequestTelemetry> telemetry;
  // Critical-path latency: slowest map chunk (all attempts) plus each reduce level.
  std::int64_t latency_ms = 0;

  bool ok() const { return response.has_value(); }
  std::int64_t tokens_sent() const;
  std::int64_t tokens_received() const;
  Decimal total_cost() const;
};

// single: one request. map_reduce: one request per chunk (concurrently, one
// retry each), then a synthesis request over the chunk answers in index
// order; synthesis input that exceeds the window is itself reduced in groups.
ExecutionResult execute(const context::FanoutPlan& plan, TextBackend& backend,
                        const ExecuteOptions& options = {});

// The synthesis request body for a list of partial answers.
std::string render_reduce_content(std::string_view instruction, std::string_view query,
                                  const std::vector<std::string>& answers);

struct GatewayResult {
  std::string model;
  context::FanoutMode mode = context::FanoutMode::kSingle;
  std::size_t chunk_count = 0;
  ExecutionResult execution;
};

// Routing plus execution behind one call, with a shared telemetry log.
class Gateway {
 public:
  struct Options {
    context::TokenizerSpec tokenizer;
    std::int64_t output_reserve = context::kDefaultOutputReserve;
    std::size_t parallelism = 4;
  };

  Gateway(const ModelRegistry& registry, TextBackend& backend, Options options);

  // preferred_model, when registered, bypasses routing (its window still
  // decides single vs map_reduce).
  GatewayResult complete(std::string system_prompt, std::string query, std::string record_text,
                         const std::string& request_prefix,
                         const std::optional<std::string>& preferred_model = std::nullopt);

  const ModelRegistry& registry() const { return registry_; }
  const Options& options() const { return options_; }
  TelemetryLog& telemetry() { return telemetry_; }

 private:
  const ModelRegistry& registry_;
  TextBackend& backend_;
  Options options_;
  TelemetryLog telemetry_;
};

}  // namespace clinctx::gateway
