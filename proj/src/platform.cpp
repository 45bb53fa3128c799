#include "clinctx/platform.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "clinctx/error.hpp"
#include "clinctx/prompts.hpp"

namespace clinctx {

Platform::Platform(config::PlatformConfig config)
    : config_(std::move(config)),
      registry_(config_.models),
      embedder_(std::make_unique<gateway::TrigramHashEmbedder>(config_.embedding_dimension)),
      clock_(config::make_clock(config_)) {}

gateway::TextBackend& Platform::backend(const std::string& role) {
  auto it = backends_.find(role);
  if (it == backends_.end()) {
    it = backends_.emplace(role, config::make_backend(role, config_.backend(role))).first;
  }
  return *it->second;
}

gateway::Gateway& Platform::gateway(const std::string& role) {
  auto it = gateways_.find(role);
  if (it == gateways_.end()) {
    gateway::Gateway::Options opts;
    opts.tokenizer = config_.tokenizer;
    opts.output_reserve = config_.output_reserve;
    opts.parallelism = config_.parallelism;
    it = gateways_.emplace(role, std::make_unique<gateway::Gateway>(registry_, backend(role), opts)).first;
  }
  return *it->second;
}

timeline::TimelineStore& Platform::store() {
  if (!store_) {
    store_ = std::make_unique<timeline::TimelineStore>();
    if (std::filesystem::is_directory(config_.paths.patients)) store_->load_directory(config_.paths.patients);
  }
  return *store_;
}

std::string Platform::chat_system_prompt() const {
  if (!config_.chat_system_prompt_file) return std::string(prompts::chat_system());
  std::ifstream in(*config_.chat_system_prompt_file, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot read " + config_.chat_system_prompt_file->string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace clinctx
