#include "clinctx/config.hpp"

#include <cstdlib>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "clinctx/error.hpp"
#include "clinctx/mock_backends.hpp"

namespace clinctx::config {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

[[noreturn]] void fail(const std::string& msg) { throw Error(ErrorCode::kConfigError, msg); }

Decimal decimal_of(const json& v, const std::string& what) {
  if (v.is_string()) return Decimal::parse(v.get<std::string>());
  if (v.is_number()) return Decimal::parse(v.dump());
  fail(what + " must be a number or string");
}

BackendSpec default_backend(const std::string& role) {
  BackendSpec b;
  if (role == "chat" || role == "automation") b.type = "extractive";
  else if (role == "entailment") b.type = "containment";
  else if (role == "claim_classifier") b.type = "keyword";
  else b.type = "rule";
  return b;
}

bool known_role(const std::string& role) {
  for (const char* r : kRoles) {
    if (role == r) return true;
  }
  return false;
}

BackendSpec parse_backend(const std::string& role, const json& j, const fs::path& base) {
  if (!j.is_object() || !j.contains("type") || !j["type"].is_string()) fail("backend " + role + " needs a type");
  BackendSpec b;
  b.type = j["type"].get<std::string>();
  b.latency_ms = j.value("latency_ms", std::int64_t{0});
  if (b.type == "scripted") {
    if (!j.contains("fixture")) fail("scripted backend " + role + " needs a fixture");
    b.fixture = base / j["fixture"].get<std::string>();
    if (!fs::exists(b.fixture)) fail("fixture not found: " + b.fixture.string());
  } else if (b.type == "http") {
    b.url = j.value("url", std::string{});
    if (b.url.empty()) fail("http backend " + role + " needs a url");
    b.token_env = j.value("token_env", std::string{});
    b.timeout_s = j.value("timeout_s", std::int64_t{120});
  } else if (b.type == "extractive") {
    b.sentences = j.value("sentences", std::size_t{2});
    if (!j.contains("latency_ms")) b.latency_ms = 1200;
  } else if (b.type == "keyword") {
    b.inaccuracy_markers = j.value("inaccuracy_markers", std::vector<std::string>{});
    b.risk_level = j.value("risk_level", 3);
  } else if (b.type == "rule") {
    if (role != "task_normalizer" && role != "linguistic") fail("no rule backend for role " + role);
  } else if (b.type != "containment") {
    fail("unknown backend type: " + b.type);
  }
  return b;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kConfigError, "cannot read config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

const BackendSpec& PlatformConfig::backend(const std::string& role) const {
  auto it = backends.find(role);
  if (it == backends.end()) fail("no backend for role " + role);
  return it->second;
}

PlatformConfig parse_config(const std::string& json_text, const fs::path& base_dir) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    fail(std::string("config is not JSON: ") + e.what());
  }
  if (!doc.is_object()) fail("config must be an object");
  PlatformConfig c;
  c.base_dir = base_dir;
  try {
    if (doc.contains("seed")) {
      if (!doc["seed"].is_number_integer()) fail("seed must be an integer");
      c.seed = doc["seed"].get<std::uint64_t>();
    }
    c.parallelism = doc.value("parallelism", std::size_t{4});
    if (c.parallelism == 0) fail("parallelism must be positive");
    c.output_reserve = doc.value("output_reserve", context::kDefaultOutputReserve);
    if (doc.contains("tokenizer")) {
      const auto& t = doc["tokenizer"];
      std::string rule = t.value("rule", std::string("chars_div"));
      if (rule == "chars_div") c.tokenizer = context::TokenizerSpec::chars_div(t.value("divisor", std::int64_t{4}));
      else if (rule == "whitespace_words") c.tokenizer = context::TokenizerSpec::whitespace_words();
      else fail("unknown tokenizer rule: " + rule);
    }
    for (const auto& m : doc.value("models", json::array())) {
      gateway::ModelProfile p;
      p.name = m.at("name").get<std::string>();
      p.window_tokens = m.at("window_tokens").get<std::int64_t>();
      p.input_price_per_1k = decimal_of(m.at("input_price_per_1k"), "input_price_per_1k");
      p.output_price_per_1k = decimal_of(m.at("output_price_per_1k"), "output_price_per_1k");
      if (m.contains("throughput_tokens_per_min")) {
        p.throughput_tokens_per_min = m["throughput_tokens_per_min"].get<std::int64_t>();
      }
      for (const auto& tag : m.value("tags", json::array())) p.tags.insert(tag.get<std::string>());
      try {
        p.validate();
      } catch (const Error& e) {
        fail(e.detail());
      }
      c.models.push_back(std::move(p));
    }
    const json backends = doc.value("backends", json::object());
    for (const auto& [role, spec] : backends.items()) {
      if (!known_role(role)) fail("unknown backend role: " + role);
      c.backends[role] = parse_backend(role, spec, base_dir);
    }
    for (const char* role : kRoles) {
      if (!c.backends.count(role)) c.backends[role] = default_backend(role);
    }
    if (doc.contains("embedding")) c.embedding_dimension = doc["embedding"].value("dimension", std::size_t{256});
    if (c.embedding_dimension == 0) fail("embedding dimension must be positive");

    const json paths = doc.value("paths", json::object());
    auto path_of = [&](const char* key, const char* fallback) {
      return base_dir / paths.value(key, std::string(fallback));
    };
    c.paths.patients = path_of("patients", "patients");
    c.paths.logs = path_of("logs", "logs");
    c.paths.automations = path_of("automations", "automations");
    c.paths.gold = path_of("gold", "gold");
    c.paths.jobs = path_of("jobs", "jobs");
    c.paths.snapshots = path_of("snapshots", "snapshots");
    c.paths.worklists = path_of("worklists", "worklists");
    c.paths.feedback = path_of("feedback", "feedback.jsonl");
    c.paths.reports = path_of("reports", "reports");

    const json clock = doc.value("clock", json::object());
    c.system_clock = clock.value("system", false);
    c.clock_start = parse_timestamp(clock.value("start", std::string("2025-09-08T08:00:00Z")));
    c.clock_step_ms = clock.value("step_ms", std::int64_t{1000});
    if (c.clock_step_ms < 0) fail("clock step must not be negative");

    const json chat = doc.value("chat", json::object());
    if (chat.contains("system_prompt_file")) {
      c.chat_system_prompt_file = base_dir / chat["system_prompt_file"].get<std::string>();
      if (!fs::exists(*c.chat_system_prompt_file)) fail("file not found: " + c.chat_system_prompt_file->string());
    }
    if (chat.contains("preferred_model")) c.preferred_model = chat["preferred_model"].get<std::string>();
  } catch (const json::exception& e) {
    fail(std::string("bad config field: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kConfigError) throw;
    fail(e.detail());
  }
  if (c.models.empty()) fail("config lists no models");
  return c;
}

PlatformConfig load_config(const fs::path& path) {
  return parse_config(slurp(path), fs::absolute(path).parent_path());
}

fs::path resolve_config_path(const std::optional<std::string>& flag) {
  if (flag && !flag->empty()) return *flag;
  if (const char* env = std::getenv("CLINCTX_CONFIG"); env && *env) return env;
  fail("no config given (use --config or CLINCTX_CONFIG)");
}

std::unique_ptr<gateway::TextBackend> make_backend(const std::string& role, const BackendSpec& spec) {
  using namespace gateway;
  if (spec.type == "scripted") return std::unique_ptr<TextBackend>(new ScriptedBackend(ScriptedBackend::from_file(spec.fixture)));
  if (spec.type == "http") {
    return std::make_unique<HttpTextBackend>(spec.url, spec.token_env, std::chrono::seconds(spec.timeout_s));
  }
  if (spec.type == "extractive") return std::make_unique<ExtractiveBackend>(spec.sentences, spec.latency_ms);
  if (spec.type == "containment") return std::make_unique<ContainmentEntailmentBackend>(spec.latency_ms);
  if (spec.type == "keyword") {
    return std::make_unique<KeywordClaimClassifier>(spec.inaccuracy_markers, spec.risk_level, spec.latency_ms);
  }
  if (spec.type == "rule" && role == "task_normalizer") return std::make_unique<RuleTaskNormalizer>();
  if (spec.type == "rule" && role == "linguistic") return std::make_unique<RuleLinguisticClassifier>();
  fail("unknown backend type: " + spec.type);
}

Timestamp SteppingClock::now() {
  std::lock_guard lock(mu_);
  return start_ + step_ * (calls_++);
}

std::unique_ptr<Clock> make_clock(const PlatformConfig& config) {
  if (config.system_clock) return std::make_unique<SystemClock>();
  return std::make_unique<SteppingClock>(config.clock_start, std::chrono::milliseconds(config.clock_step_ms));
}

}  // namespace clinctx::config
