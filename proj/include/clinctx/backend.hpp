#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "clinctx/error.hpp"

namespace clinctx::gateway {

struct Completion {
  std::string text;
  std::optional<std::int64_t> tokens_in;
  std::optional<std::int64_t> tokens_out;
  // Backends that simulate time (the mocks) report it here; otherwise the
  // gateway measures wall-clock time around the call.
  std::optional<std::int64_t> latency_ms;
};

// Thrown by backends. `error_code` is the short code recorded in telemetry
// (e.g. "timeout", "http_503").
class BackendError : public Error {
 public:
  BackendError(std::string error_code, const std::string& message,
               std::optional<std::int64_t> latency_ms = std::nullopt)
      : Error(ErrorCode::kBackendError, error_code + ": " + message),
        error_code_(std::move(error_code)),
        latency_ms_(latency_ms) {}

  const std::string& error_code() const { return error_code_; }
  std::optional<std::int64_t> latency_ms() const { return latency_ms_; }

 private:
  std::string error_code_;
  std::optional<std::int64_t> latency_ms_;
};

// Implementations must be safe to call from several threads at once.
class TextBackend {
 public:
  virtual ~TextBackend() = default;
  virtual Completion complete(const std::string& system_prompt, const std::string& user_content) = 0;
};

class EmbeddingBackend {
 public:
  virtual ~EmbeddingBackend() = default;
  virtual std::size_t dimension() const = 0;
  virtual std::vector<double> embed(std::string_view text) const = 0;
};

// Character-trigram feature hashing, L2-normalized. The text is lowercased
// and padded with two spaces on each side, so every input (even empty) has at
// least two trigrams and a unit-norm vector.
class TrigramHashEmbedder final : public EmbeddingBackend {
 public:
  explicit TrigramHashEmbedder(std::size_t dimension = 256);
  std::size_t dimension() const override { return dimension_; }
  std::vector<double> embed(std::string_view text) const override;

 private:
  std::size_t dimension_;
};

// Generic JSON-over-HTTP model endpoint:
//   POST <url> {"system": ..., "content": ...} -> {"text", "tokens_in", "tokens_out"}
// The bearer token is read from the named environment variable at call time.
class HttpTextBackend final : public TextBackend {
 public:
  HttpTextBackend(std::string url, std::string token_env_var,
                  std::chrono::seconds timeout = std::chrono::seconds(120));
  Completion complete(const std::string& system_prompt, const std::string& user_content) override;

 private:
  std::string base_;
  std::string path_;
  std::string token_env_var_;
  std::chrono::seconds timeout_;
};

}  // namespace clinctx::gateway
