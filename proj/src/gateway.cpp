#include "clinctx/gateway.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <chrono>

#include "clinctx/concurrency.hpp"
#include "clinctx/error.hpp"

namespace clinctx::gateway {
namespace {

struct Attempt {
  RequestTelemetry telemetry;
  std::optional<std::string> text;
  std::string error_message;
};

Attempt call_once(TextBackend& backend, const std::string& system, const std::string& content,
                  std::string request_id, const context::FanoutPlan& plan,
                  const ExecuteOptions& options) {
  Attempt a;
  a.telemetry.request_id = std::move(request_id);
  a.telemetry.model = plan.model_name;
  a.telemetry.tokens_sent = plan.tokenizer.count(system) + plan.tokenizer.count(content);
  auto started = std::chrono::steady_clock::now();
  auto measured = [&] {
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() -
                                                                 started)
        .count();
  };
  try {
    Completion c = backend.complete(system, content);
    a.telemetry.latency_ms = c.latency_ms.value_or(measured());
    if (c.tokens_in) a.telemetry.tokens_sent = *c.tokens_in;
    a.telemetry.tokens_received = c.tokens_out.value_or(plan.tokenizer.count(c.text));
    a.text = std::move(c.text);
  } catch (const BackendError& e) {
    a.telemetry.latency_ms = e.latency_ms().value_or(measured());
    a.telemetry.error_code = e.error_code();
    a.error_message = e.what();
  } catch (const std::exception& e) {
    a.telemetry.latency_ms = measured();
    a.telemetry.error_code = "backend_exception";
    a.error_message = e.what();
  }
  if (options.profile) a.telemetry.cost = cost(a.telemetry, *options.profile);
  return a;
}

bool fits_window(const context::FanoutPlan& plan, const std::string& content) {
  std::int64_t tokens = plan.tokenizer.count(plan.system_prompt) + plan.tokenizer.count(content);
  return tokens + plan.output_reserve <= plan.window_tokens;
}

// Splits answers into consecutive groups whose synthesis request fits the
// window; an answer too large on its own is cut into pieces first.
std::vector<std::vector<std::string>> group_answers(const context::FanoutPlan& plan,
                                                    const std::vector<std::string>& answers) {
  std::vector<std::vector<std::string>> groups;
  std::vector<std::string> current;
  auto fits = [&](const std::vector<std::string>& g) {
    return fits_window(plan, render_reduce_content(plan.reduce_instruction, plan.query, g));
  };
  for (const auto& answer : answers) {
    current.push_back(answer);
    if (fits(current)) continue;
    current.pop_back();
    if (!current.empty()) {
      groups.push_back(std::move(current));
      current.clear();
      current.push_back(answer);
      if (fits(current)) continue;
      current.clear();
    }
    std::int64_t overhead = plan.tokenizer.count(plan.system_prompt) +
                            plan.tokenizer.count(render_reduce_content(plan.reduce_instruction,
                                                                       plan.query, {""}));
    std::int64_t budget = plan.window_tokens - plan.output_reserve - overhead;
    if (budget <= 0) {
      throw Error(ErrorCode::kWindowTooSmall, "synthesis instructions alone exceed the window");
    }
    auto piece_chars = static_cast<std::size_t>(
        std::max<std::int64_t>(2, plan.tokenizer.chars_for_tokens(budget, answer)));
    for (auto& piece : context::chunk_text(answer, piece_chars, 0)) {
      groups.push_back({std::move(piece.text)});
    }
  }
  if (!current.empty()) groups.push_back(std::move(current));
  return groups;
}

}  // namespace

void ModelProfile::validate() const {
  if (name.empty()) throw Error(ErrorCode::kInvalidParams, "model profile without a name");
  if (window_tokens <= 0) {
    throw Error(ErrorCode::kInvalidParams, fmt::format("model '{}' window must be > 0", name));
  }
  if (input_price_per_1k < Decimal{} || output_price_per_1k < Decimal{}) {
    throw Error(ErrorCode::kInvalidParams, fmt::format("model '{}' has a negative price", name));
  }
}

ModelRegistry::ModelRegistry(std::vector<ModelProfile> models) {
  for (auto& m : models) add(std::move(m));
}

void ModelRegistry::add(ModelProfile profile) {
  profile.validate();
  std::unique_lock lock(mu_);
  auto it = std::find_if(models_.begin(), models_.end(),
                         [&](const ModelProfile& m) { return m.name == profile.name; });
  if (it != models_.end()) {
    *it = std::move(profile);
  } else {
    models_.push_back(std::move(profile));
    std::sort(models_.begin(), models_.end(),
              [](const ModelProfile& a, const ModelProfile& b) { return a.name < b.name; });
  }
}

bool ModelRegistry::remove(const std::string& name) {
  std::unique_lock lock(mu_);
  return std::erase_if(models_, [&](const ModelProfile& m) { return m.name == name; }) > 0;
}

std::optional<ModelProfile> ModelRegistry::find(const std::string& name) const {
  std::shared_lock lock(mu_);
  for (const auto& m : models_) {
    if (m.name == name) return m;
  }
  return std::nullopt;
}

std::vector<ModelProfile> ModelRegistry::list() const {
  std::shared_lock lock(mu_);
  return models_;
}

std::size_t ModelRegistry::size() const {
  std::shared_lock lock(mu_);
  return models_.size();
}

void TelemetryLog::append(const RequestTelemetry& record) {
  std::lock_guard lock(mu_);
  records_.push_back(record);
}

void TelemetryLog::append(const std::vector<RequestTelemetry>& records) {
  std::lock_guard lock(mu_);
  records_.insert(records_.end(), records.begin(), records.end());
}

std::vector<RequestTelemetry> TelemetryLog::snapshot() const {
  std::lock_guard lock(mu_);
  return records_;
}

std::size_t TelemetryLog::size() const {
  std::lock_guard lock(mu_);
  return records_.size();
}

Decimal cost(const RequestTelemetry& telemetry, const ModelProfile& profile) {
  if (telemetry.model != profile.name) {
    throw Error(ErrorCode::kProfileMismatch,
                fmt::format("telemetry for '{}' priced with '{}'", telemetry.model, profile.name));
  }
  // Both terms share the 1/1000 factor; summing before dividing rounds once.
  __int128 numerator = static_cast<__int128>(telemetry.tokens_sent) * profile.input_price_per_1k.raw() +
                       static_cast<__int128>(telemetry.tokens_received) * profile.output_price_per_1k.raw();
  return Decimal::from_raw(div_round_half_up(numerator, 1000));
}

RouteDecision route(const context::ContextPackage& pkg, const ModelRegistry& registry,
                    std::int64_t output_reserve, const context::TokenizerSpec& tokenizer) {
  std::vector<ModelProfile> models = registry.list();
  if (models.empty()) throw Error(ErrorCode::kEmptyRegistry, "no models registered");
  auto cheaper = [](const ModelProfile& a, const ModelProfile& b) {
    if (a.input_price_per_1k != b.input_price_per_1k) return a.input_price_per_1k < b.input_price_per_1k;
    return a.name < b.name;
  };
  std::int64_t needed = pkg.token_counts.total + output_reserve;
  const ModelProfile* chosen = nullptr;
  for (const auto& m : models) {
    if (m.window_tokens < needed) continue;
    if (chosen == nullptr || m.window_tokens < chosen->window_tokens ||
        (m.window_tokens == chosen->window_tokens && cheaper(m, *chosen))) {
      chosen = &m;
    }
  }
  if (chosen == nullptr) {
    for (const auto& m : models) {
      if (chosen == nullptr || m.window_tokens > chosen->window_tokens ||
          (m.window_tokens == chosen->window_tokens && cheaper(m, *chosen))) {
        chosen = &m;
      }
    }
  }
  RouteDecision decision{*chosen, {}};
  decision.plan = context::plan_fanout(pkg, chosen->window_tokens, output_reserve, tokenizer, chosen->name);
  return decision;
}

std::string render_reduce_content(std::string_view instruction, std::string_view query,
                                  const std::vector<std::string>& answers) {
  std::string out(instruction);
  out += "\n\nRequest:\n";
  out += query;
  for (std::size_t i = 0; i < answers.size(); ++i) {
    out += fmt::format("\n\n[Partial answer {} of {}]\n", i + 1, answers.size());
    out += answers[i];
  }
  return out;
}

std::int64_t ExecutionResult::tokens_sent() const {
  std::int64_t n = 0;
  for (const auto& t : telemetry) n += t.tokens_sent;
  return n;
}

std::int64_t ExecutionResult::tokens_received() const {
  std::int64_t n = 0;
  for (const auto& t : telemetry) n += t.tokens_received;
  return n;
}

Decimal ExecutionResult::total_cost() const {
  Decimal sum;
  for (const auto& t : telemetry) sum += t.cost;
  return sum;
}

ExecutionResult execute(const context::FanoutPlan& plan, TextBackend& backend,
                        const ExecuteOptions& options) {
  if (plan.chunks.empty()) throw Error(ErrorCode::kInvalidParams, "plan has no chunks");
  ExecutionResult result;
  auto finish = [&]() -> ExecutionResult {
    if (options.sink != nullptr) options.sink->append(result.telemetry);
    return std::move(result);
  };
  auto fail = [&](const Attempt& a) {
    result.error_code = a.telemetry.error_code.value_or("backend_error");
    result.error_message = a.error_message;
  };

  if (plan.mode == context::FanoutMode::kSingle) {
    std::string content = context::render_user_content(plan.query, plan.chunks[0].text);
    Attempt a = call_once(backend, plan.system_prompt, content, options.request_prefix, plan, options);
    result.latency_ms = a.telemetry.latency_ms;
    result.telemetry.push_back(a.telemetry);
    if (a.text) {
      result.response = std::move(a.text);
    } else {
      fail(a);
    }
    return finish();
  }

  const std::size_t n = plan.chunks.size();
  std::vector<std::vector<Attempt>> attempts(n);
  parallel_for(n, options.parallelism, [&](std::size_t i) {
    std::string content = context::render_user_content(plan.query, plan.chunks[i].text);
    for (int k = 1; k <= 2; ++k) {
      attempts[i].push_back(call_once(backend, plan.system_prompt, content,
                                      fmt::format("{}-map-{}-a{}", options.request_prefix, i, k),
                                      plan, options));
      if (attempts[i].back().text) break;
    }
  });

  std::vector<std::string> answers;
  const Attempt* failed = nullptr;
  std::int64_t slowest = 0;
  for (auto& chunk_attempts : attempts) {
    std::int64_t chunk_latency = 0;
    for (auto& a : chunk_attempts) {
      chunk_latency += a.telemetry.latency_ms;
      result.telemetry.push_back(a.telemetry);
    }
    slowest = std::max(slowest, chunk_latency);
    if (chunk_attempts.back().text) {
      answers.push_back(*chunk_attempts.back().text);
    } else if (failed == nullptr) {
      failed = &chunk_attempts.back();
    }
  }
  result.latency_ms = slowest;
  if (failed != nullptr) {
    fail(*failed);
    return finish();
  }

  for (std::size_t level = 0;; ++level) {
    if (level >= options.max_reduce_depth) {
      result.error_code = "reduce_depth";
      result.error_message = "synthesis did not fit the window after repeated reduction";
      return finish();
    }
    std::string content = render_reduce_content(plan.reduce_instruction, plan.query, answers);
    if (fits_window(plan, content) || answers.size() == 1) {
      Attempt a = call_once(backend, plan.system_prompt, content,
                            fmt::format("{}-reduce-{}", options.request_prefix, level), plan, options);
      result.latency_ms += a.telemetry.latency_ms;
      result.telemetry.push_back(a.telemetry);
      if (a.text) {
        result.response = std::move(a.text);
      } else {
        fail(a);
      }
      return finish();
    }
    auto groups = group_answers(plan, answers);
    std::vector<Attempt> partial(groups.size());
    parallel_for(groups.size(), options.parallelism, [&](std::size_t g) {
      partial[g] = call_once(backend, plan.system_prompt,
                             render_reduce_content(plan.reduce_instruction, plan.query, groups[g]),
                             fmt::format("{}-reduce-{}-{}", options.request_prefix, level, g), plan,
                             options);
    });
    std::int64_t level_latency = 0;
    answers.clear();
    for (auto& a : partial) {
      level_latency = std::max(level_latency, a.telemetry.latency_ms);
      result.telemetry.push_back(a.telemetry);
      if (!a.text && result.error_code.empty()) fail(a);
      if (a.text) answers.push_back(*a.text);
    }
    result.latency_ms += level_latency;
    if (!result.error_code.empty()) return finish();
  }
}

Gateway::Gateway(const ModelRegistry& registry, TextBackend& backend, Options options)
    : registry_(registry), backend_(backend), options_(std::move(options)) {}

GatewayResult Gateway::complete(std::string system_prompt, std::string query, std::string record_text,
                                const std::string& request_prefix,
                                const std::optional<std::string>& preferred_model) {
  auto pkg = context::build_context(std::move(record_text), std::move(query), std::move(system_prompt),
                                    options_.tokenizer);
  std::optional<ModelProfile> preferred;
  if (preferred_model) preferred = registry_.find(*preferred_model);
  RouteDecision decision =
      preferred ? RouteDecision{*preferred, context::plan_fanout(pkg, preferred->window_tokens,
                                                                 options_.output_reserve,
                                                                 options_.tokenizer, preferred->name)}
                : route(pkg, registry_, options_.output_reserve, options_.tokenizer);
  ExecuteOptions exec;
  exec.parallelism = options_.parallelism;
  exec.request_prefix = request_prefix;
  exec.profile = decision.model;
  exec.sink = &telemetry_;
  GatewayResult out;
  out.model = decision.model.name;
  out.mode = decision.plan.mode;
  out.chunk_count = decision.plan.chunks.size();
  out.execution = execute(decision.plan, backend_, exec);
  return out;
}

}  // namespace clinctx::gateway
