#pragma once

#include <map>
#include <memory>
#include <string>

#include "clinctx/backend.hpp"
#include "clinctx/config.hpp"
#include "clinctx/gateway.hpp"
#include "clinctx/timeline.hpp"

namespace clinctx {

// Everything a CLI command or the server needs, built once from a config.
// Backends are created lazily so commands only pay for what they use.
class Platform {
 public:
  explicit Platform(config::PlatformConfig config);

  const config::PlatformConfig& config() const { return config_; }
  const gateway::ModelRegistry& registry() const { return registry_; }
  const gateway::EmbeddingBackend& embedder() const { return *embedder_; }
  Clock& clock() { return *clock_; }

  gateway::TextBackend& backend(const std::string& role);
  // Gateway over the backend for `role` ("chat" or "automation").
  gateway::Gateway& gateway(const std::string& role);

  // Loads the patients directory on first use.
  timeline::TimelineStore& store();
  std::string chat_system_prompt() const;

 private:
  config::PlatformConfig config_;
  gateway::ModelRegistry registry_;
  std::unique_ptr<gateway::EmbeddingBackend> embedder_;
  std::unique_ptr<Clock> clock_;
  std::map<std::string, std::unique_ptr<gateway::TextBackend>> backends_;
  std::map<std::string, std::unique_ptr<gateway::Gateway>> gateways_;
  std::unique_ptr<timeline::TimelineStore> store_;
};

}  // namespace clinctx
