#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "clinctx/chat.hpp"
#include "clinctx/timeline.hpp"

namespace clinctx::server {

struct Response {
  int status = 200;
  std::string body;  // JSON
};

// Routes:
//   POST /sessions                          {patient_id, kinds[], start?, end?, user_id?, department?}
//   POST /sessions/{id}/messages            {query}
//   POST /sessions/{id}/turns/{n}/feedback  {thumbs, note?}
//   GET  /sessions/{id}/log
//   GET  /patients
//   GET  /metrics
//   POST /export                            {from?, to?, file?}
// Errors come back as {"error": <code>, "message": ...} with 404 for unknown
// ids, 409 for duplicate feedback, 502 for backend failures and 400 otherwise.
class Api {
 public:
  Api(chat::ChatService& chat, const timeline::TimelineStore& store, std::filesystem::path log_dir);

  // Transport-free dispatch; the HTTP server forwards every request here.
  Response handle(const std::string& method, const std::string& path, const std::string& body);

 private:
  chat::ChatService& chat_;
  const timeline::TimelineStore& store_;
  std::filesystem::path log_dir_;
};

int status_for(ErrorCode code);

class HttpServer {
 public:
  explicit HttpServer(Api& api);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Port 0 picks a free port. Returns the bound port, or -1.
  int bind(const std::string& host, int port);
  // Blocks until stop().
  bool listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace clinctx::server
