#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <fmt/format.h>

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <nlohmann/json.hpp>

#include "clinctx/backend.hpp"

namespace clinctx::gateway {

TrigramHashEmbedder::TrigramHashEmbedder(std::size_t dimension) : dimension_(dimension) {
  if (dimension_ == 0) throw Error(ErrorCode::kInvalidParams, "embedding dimension must be > 0");
}

std::vector<double> TrigramHashEmbedder::embed(std::string_view text) const {
  std::string padded = "  ";
  padded.reserve(text.size() + 4);
  for (char c : text) padded += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  padded += "  ";

  std::vector<double> v(dimension_, 0.0);
  for (std::size_t i = 0; i + 3 <= padded.size(); ++i) {
    std::uint64_t h = 1469598103934665603ULL;  // FNV-1a 64
    for (std::size_t k = 0; k < 3; ++k) {
      h ^= static_cast<unsigned char>(padded[i + k]);
      h *= 1099511628211ULL;
    }
    v[h % dimension_] += 1.0;
  }
  double norm = 0.0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;
  return v;
}

HttpTextBackend::HttpTextBackend(std::string url, std::string token_env_var,
                                 std::chrono::seconds timeout)
    : token_env_var_(std::move(token_env_var)), timeout_(timeout) {
  std::size_t scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorCode::kConfigError, "backend url needs a scheme: " + url);
  }
  std::size_t path_start = url.find('/', scheme_end + 3);
  base_ = url.substr(0, path_start);
  path_ = path_start == std::string::npos ? "/" : url.substr(path_start);
}

Completion HttpTextBackend::complete(const std::string& system_prompt,
                                     const std::string& user_content) {
  httplib::Client client(base_);
  client.set_connection_timeout(timeout_);
  client.set_read_timeout(timeout_);
  client.set_write_timeout(timeout_);
  httplib::Headers headers;
  if (!token_env_var_.empty()) {
    if (const char* token = std::getenv(token_env_var_.c_str()); token != nullptr && *token) {
      headers.emplace("Authorization", std::string("Bearer ") + token);
    }
  }
  nlohmann::json body = {{"system", system_prompt}, {"content", user_content}};
  auto res = client.Post(path_, headers, body.dump(), "application/json");
  if (!res) {
    auto err = res.error();
    std::string code = err == httplib::Error::Read || err == httplib::Error::Write ? "timeout"
                                                                                   : "connection_error";
    throw BackendError(code, httplib::to_string(err));
  }
  if (res->status != 200) {
    throw BackendError(fmt::format("http_{}", res->status), res->body.substr(0, 200));
  }
  try {
    auto doc = nlohmann::json::parse(res->body);
    Completion c;
    c.text = doc.at("text").get<std::string>();
    if (doc.contains("tokens_in") && doc["tokens_in"].is_number_integer()) {
      c.tokens_in = doc["tokens_in"].get<std::int64_t>();
    }
    if (doc.contains("tokens_out") && doc["tokens_out"].is_number_integer()) {
      c.tokens_out = doc["tokens_out"].get<std::int64_t>();
    }
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw BackendError("bad_response", e.what());
  }
}

}  // namespace clinctx::gateway
