#include <doctest.h>

#include <cstdlib>

#include "clinctx/config.hpp"
#include "clinctx/error.hpp"
#include "clinctx/platform.hpp"
#include "test_support.hpp"

using namespace clinctx;
using namespace clinctx::config;

TEST_CASE("sample config loads with resolved paths") {
  auto cfg = load_config(testsupport::source_dir() + "/samples/config/platform.json");
  CHECK(cfg.seed == 7);
  CHECK(cfg.models.size() == 3);
  CHECK(cfg.backend("chat").type == "extractive");
  CHECK(cfg.backend("automation").type == "scripted");
  CHECK(cfg.paths.patients.is_absolute());
  CHECK(std::filesystem::exists(cfg.paths.patients));
  for (const char* role : kRoles) CHECK(make_backend(role, cfg.backend(role)) != nullptr);
}

TEST_CASE("defaults and errors") {
  testsupport::TempDir dir("cfg");
  auto cfg = parse_config(R"({"seed": 1, "models": [{"name": "m", "window_tokens": 1000,
      "input_price_per_1k": "0.001", "output_price_per_1k": 0.002}]})", dir.path());
  CHECK(cfg.backend("entailment").type == "containment");
  CHECK(cfg.backend("linguistic").type == "rule");
  CHECK(cfg.paths.logs == dir.path() / "logs");
  CHECK(cfg.models[0].output_price_per_1k == Decimal::parse("0.002"));
  CHECK_THROWS_AS(parse_config("{", dir.path()), Error);
  CHECK_THROWS_AS(parse_config(R"({"seed": 1, "models": []})", dir.path()), Error);
  CHECK_THROWS_AS(parse_config(R"({"seed": "x", "models": [{"name": "m", "window_tokens": 1000,
      "input_price_per_1k": 0, "output_price_per_1k": 0}]})", dir.path()), Error);
  CHECK_THROWS_AS(parse_config(R"({"seed": 1, "models": [{"name": "m", "window_tokens": 1000,
      "input_price_per_1k": 0, "output_price_per_1k": 0}],
      "backends": {"chat": {"type": "scripted", "fixture": "missing.json"}}})", dir.path()), Error);
  CHECK_THROWS_AS(parse_config(R"({"seed": 1, "models": [{"name": "m", "window_tokens": 1000,
      "input_price_per_1k": 0, "output_price_per_1k": 0}],
      "backends": {"chat": {"type": "rule"}}})", dir.path()), Error);
}

TEST_CASE("config path resolution") {
  CHECK(resolve_config_path(std::string("a.json")) == "a.json");
  ::setenv("CLINCTX_CONFIG", "b.json", 1);
  CHECK(resolve_config_path(std::nullopt) == "b.json");
  ::unsetenv("CLINCTX_CONFIG");
  CHECK_THROWS_AS(resolve_config_path(std::nullopt), Error);
}

TEST_CASE("stepping clock") {
  SteppingClock c(parse_timestamp("2025-01-01T00:00:00Z"), std::chrono::milliseconds(250));
  CHECK(format_timestamp(c.now()) == "2025-01-01T00:00:00Z");
  CHECK(format_timestamp(c.now()) == "2025-01-01T00:00:00.250Z");
}

TEST_CASE("platform wiring") {
  Platform p(load_config(testsupport::source_dir() + "/samples/config/platform.json"));
  CHECK(p.store().size() == 20);
  CHECK(&p.gateway("chat") == &p.gateway("chat"));
  CHECK_FALSE(p.chat_system_prompt().empty());
}
