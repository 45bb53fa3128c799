#include "clinctx/server.hpp"

#include <fmt/format.h>
#include <httplib.h>

#include <charconv>
#include <fstream>
#include <nlohmann/json.hpp>

#include "clinctx/error.hpp"
#include "clinctx/metrics.hpp"
#include "clinctx/session_log.hpp"

namespace clinctx::server {
namespace {

using nlohmann::json;
using ojson = nlohmann::ordered_json;

Response error_response(int status, std::string_view code, const std::string& message) {
  ojson body{{"error", std::string(code)}, {"message", message}};
  return {status, body.dump()};
}

std::vector<std::string> split_path(std::string_view path) {
  std::vector<std::string> parts;
  std::size_t i = 0;
  while (i < path.size()) {
    while (i < path.size() && path[i] == '/') ++i;
    std::size_t j = path.find('/', i);
    if (j == std::string_view::npos) j = path.size();
    if (j > i) parts.emplace_back(path.substr(i, j - i));
    i = j;
  }
  return parts;
}

json parse_body(const std::string& body) {
  if (body.empty()) return json::object();
  json j;
  try {
    j = json::parse(body);
  } catch (const json::exception&) {
    throw Error(ErrorCode::kInvalidParams, "request body is not JSON");
  }
  if (!j.is_object()) throw Error(ErrorCode::kInvalidParams, "request body must be an object");
  return j;
}

std::string string_field(const json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_string()) {
    throw Error(ErrorCode::kInvalidParams, fmt::format("field '{}' must be a string", key));
  }
  return j[key].get<std::string>();
}

std::optional<Timestamp> time_field(const json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return parse_timestamp(string_field(j, key));
}

}  // namespace

int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kUnknownSession:
    case ErrorCode::kUnknownPatient:
    case ErrorCode::kUnknownTurn:
      return 404;
    case ErrorCode::kDuplicateFeedback:
      return 409;
    case ErrorCode::kBackendError:
      return 502;
    case ErrorCode::kIoError:
      return 500;
    default:
      return 400;
  }
}

Api::Api(chat::ChatService& chat, const timeline::TimelineStore& store, std::filesystem::path log_dir)
    : chat_(chat), store_(store), log_dir_(std::move(log_dir)) {}

Response Api::handle(const std::string& method, const std::string& path, const std::string& body) {
  auto parts = split_path(path.substr(0, path.find('?')));
  try {
    if (method == "POST" && parts.size() == 1 && parts[0] == "sessions") {
      json j = parse_body(body);
      timeline::ContextSelection sel;
      sel.patient_id = string_field(j, "patient_id");
      if (!j.contains("kinds") || !j["kinds"].is_array()) {
        throw Error(ErrorCode::kInvalidSelection, "field 'kinds' must be an array");
      }
      for (const auto& k : j["kinds"]) {
        auto kind = k.is_string() ? timeline::kind_from_string(k.get<std::string>()) : std::nullopt;
        if (!kind) throw Error(ErrorCode::kInvalidSelection, "unknown kind " + k.dump());
        sel.kinds.insert(*kind);
      }
      sel.start = time_field(j, "start").value_or(timeline::earliest_timestamp());
      sel.end = time_field(j, "end").value_or(timeline::latest_timestamp());
      auto log = chat_.create_session(sel, j.value("user_id", std::string{}), j.value("department", std::string{}));
      return {201, ojson{{"session_id", log.session_id}}.dump()};
    }
    if (parts.size() >= 3 && parts[0] == "sessions") {
      const std::string& sid = parts[1];
      if (method == "POST" && parts.size() == 3 && parts[2] == "messages") {
        json j = parse_body(body);
        auto turn = chat_.send_message(sid, string_field(j, "query"));
        return {200, logs::turn_to_json(turn)};
      }
      if (method == "GET" && parts.size() == 3 && parts[2] == "log") {
        return {200, logs::to_json_line(chat_.session(sid))};
      }
      if (method == "POST" && parts.size() == 5 && parts[2] == "turns" && parts[4] == "feedback") {
        int n = -1;
        auto [ptr, ec] = std::from_chars(parts[3].data(), parts[3].data() + parts[3].size(), n);
        if (ec != std::errc() || ptr != parts[3].data() + parts[3].size() || n < 0) {
          throw Error(ErrorCode::kUnknownTurn, "bad turn index " + parts[3]);
        }
        json j = parse_body(body);
        auto thumbs = logs::thumbs_from_string(string_field(j, "thumbs"));
        if (!thumbs) throw Error(ErrorCode::kInvalidParams, "thumbs must be \"up\" or \"down\"");
        std::optional<std::string> note;
        if (j.contains("note") && !j["note"].is_null()) note = string_field(j, "note");
        chat_.record_feedback(sid, n, *thumbs, note);
        auto log = chat_.session(sid);
        return {200, logs::turn_to_json(log.turns.at(static_cast<std::size_t>(n)))};
      }
    }
    if (method == "GET" && parts.size() == 1 && parts[0] == "patients") {
      ojson list = ojson::array();
      for (const auto& id : store_.patient_ids()) {
        auto tl = store_.get(id);
        ojson kinds = ojson::object();
        std::map<std::string, std::size_t> counts;
        for (const auto& e : tl->entries()) ++counts[std::string(timeline::to_string(e.kind))];
        for (const auto& [k, c] : counts) kinds[k] = c;
        ojson item{{"patient_id", id}, {"entries", tl->size()}, {"kinds", kinds}};
        if (!tl->empty()) {
          item["first"] = format_timestamp(tl->entries().front().occurred_at);
          item["last"] = format_timestamp(tl->entries().back().occurred_at);
        }
        list.push_back(std::move(item));
      }
      return {200, ojson{{"patients", list}}.dump()};
    }
    if (method == "GET" && parts.size() == 1 && parts[0] == "metrics") {
      return {200, metrics::snapshot_to_json(metrics::snapshot_of(chat_.sessions()))};
    }
    if (method == "POST" && parts.size() == 1 && parts[0] == "export") {
      json j = parse_body(body);
      std::string file = j.value("file", std::string("sessions.jsonl"));
      if (file.empty() || file.find('/') != std::string::npos || file.find("..") != std::string::npos) {
        throw Error(ErrorCode::kInvalidParams, "file must be a plain file name");
      }
      std::filesystem::create_directories(log_dir_);
      auto target = log_dir_ / file;
      std::string content = chat_.export_logs(time_field(j, "from"), time_field(j, "to"));
      std::size_t n = 0;
      for (char c : content) n += c == '\n';
      {
        std::ofstream out(target, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorCode::kIoError, "cannot write " + target.string());
        out << content;
      }
      return {200, ojson{{"file", file}, {"sessions", n}}.dump()};
    }
    return error_response(404, "not_found", method + " " + path);
  } catch (const Error& e) {
    return error_response(status_for(e.code()), to_string(e.code()), e.detail());
  } catch (const std::exception& e) {
    return error_response(500, "internal_error", e.what());
  }
}

struct HttpServer::Impl {
  httplib::Server server;
};

HttpServer::HttpServer(Api& api) : impl_(std::make_unique<Impl>()) {
  auto forward = [&api](const httplib::Request& req, httplib::Response& res) {
    Response r = api.handle(req.method, req.path, req.body);
    res.status = r.status;
    res.set_content(r.body, "application/json");
  };
  impl_->server.Get(".*", forward);
  impl_->server.Post(".*", forward);
  impl_->server.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
  impl_->server.Options(".*", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.status = 204;
  });
}

HttpServer::~HttpServer() = default;

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) return impl_->server.bind_to_any_port(host);
  return impl_->server.bind_to_port(host, port) ? port : -1;
}

bool HttpServer::listen() { return impl_->server.listen_after_bind(); }

void HttpServer::stop() { impl_->server.stop(); }

}  // namespace clinctx::server
