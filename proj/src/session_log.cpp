#include "clinctx/session_log.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "clinctx/error.hpp"
#include "clinctx/text.hpp"

namespace clinctx::logs {
namespace {

using ojson = nlohmann::ordered_json;
using nlohmann::json;

Error malformed(const std::string& what) { return Error(ErrorCode::kMalformedLog, what); }

const json& field(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw malformed(fmt::format("missing field {}", key));
  return *it;
}

std::string str(const json& j, const char* key) {
  const auto& v = field(j, key);
  if (!v.is_string()) throw malformed(fmt::format("field {} must be a string", key));
  return v.get<std::string>();
}

std::int64_t integer(const json& j, const char* key) {
  const auto& v = field(j, key);
  if (!v.is_number_integer()) throw malformed(fmt::format("field {} must be an integer", key));
  return v.get<std::int64_t>();
}

Timestamp stamp(const json& j, const char* key) {
  auto ts = try_parse_timestamp(str(j, key));
  if (!ts) throw malformed(fmt::format("field {} is not a timestamp", key));
  return *ts;
}

std::optional<std::string> opt_str(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw malformed(fmt::format("field {} must be a string", key));
  return it->get<std::string>();
}

}  // namespace

std::string_view to_string(Thumbs t) { return t == Thumbs::kUp ? "up" : "down"; }

std::optional<Thumbs> thumbs_from_string(std::string_view s) {
  if (s == "up") return Thumbs::kUp;
  if (s == "down") return Thumbs::kDown;
  return std::nullopt;
}

static ojson turn_json(const TurnRecord& t) {
  ojson e;
  e["turn_index"] = t.turn_index;
  e["at"] = format_timestamp(t.at);
  e["query"] = t.query;
  e["response"] = t.response;
  e["model"] = t.model;
  e["mode"] = t.mode;
  e["chunk_count"] = t.chunk_count;
  e["latency_assembly_ms"] = t.latency_assembly_ms;
  e["latency_inference_ms"] = t.latency_inference_ms;
  e["tokens"] = ojson{{"sent", t.tokens_sent}, {"received", t.tokens_received}};
  e["cost"] = t.cost.to_canonical();
  e["error"] = t.error ? ojson(*t.error) : ojson(nullptr);
  if (t.feedback) {
    e["feedback"] = ojson{{"thumbs", std::string(to_string(t.feedback->thumbs))},
                          {"note", t.feedback->note ? ojson(*t.feedback->note) : ojson(nullptr)},
                          {"at", format_timestamp(t.feedback->at)}};
  } else {
    e["feedback"] = nullptr;
  }
  return e;
}

std::string turn_to_json(const TurnRecord& t) { return turn_json(t).dump(); }

std::string to_json_line(const SessionLog& log) {
  ojson j;
  j["session_id"] = log.session_id;
  j["user_id"] = log.user_id;
  j["department"] = log.department;
  j["patient_id"] = log.patient_id;
  ojson kinds = ojson::array();
  for (auto k : log.selection.kinds) kinds.push_back(std::string(timeline::to_string(k)));
  j["selection"] = ojson{{"kinds", kinds},
                         {"start", format_timestamp(log.selection.start)},
                         {"end", format_timestamp(log.selection.end)}};
  j["created_at"] = format_timestamp(log.created_at);
  j["context_assembly_ms"] = log.context_assembly_ms;
  j["context_tokens"] = log.context_tokens;
  j["context_text"] = log.context_text;
  ojson turns = ojson::array();
  for (const auto& t : log.turns) turns.push_back(turn_json(t));
  j["turns"] = std::move(turns);
  return j.dump();
}

SessionLog parse_session_log(std::string_view line) {
  json j = json::parse(line.begin(), line.end(), nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw malformed("not a JSON object");
  SessionLog log;
  log.session_id = str(j, "session_id");
  if (log.session_id.empty()) throw malformed("empty session_id");
  log.user_id = str(j, "user_id");
  log.department = str(j, "department");
  log.patient_id = str(j, "patient_id");
  const auto& sel = field(j, "selection");
  if (!sel.is_object()) throw malformed("selection must be an object");
  log.selection.patient_id = log.patient_id;
  const auto& kinds = field(sel, "kinds");
  if (!kinds.is_array()) throw malformed("selection.kinds must be a list");
  for (const auto& k : kinds) {
    if (!k.is_string()) throw malformed("selection.kinds entries must be strings");
    auto kind = timeline::kind_from_string(k.get<std::string>());
    if (!kind) throw malformed("unknown kind " + k.get<std::string>());
    log.selection.kinds.insert(*kind);
  }
  log.selection.start = stamp(sel, "start");
  log.selection.end = stamp(sel, "end");
  log.created_at = stamp(j, "created_at");
  log.context_assembly_ms = integer(j, "context_assembly_ms");
  log.context_tokens = integer(j, "context_tokens");
  log.context_text = str(j, "context_text");
  const auto& turns = field(j, "turns");
  if (!turns.is_array()) throw malformed("turns must be a list");
  for (const auto& e : turns) {
    if (!e.is_object()) throw malformed("turn must be an object");
    TurnRecord t;
    t.turn_index = static_cast<int>(integer(e, "turn_index"));
    if (t.turn_index != static_cast<int>(log.turns.size())) throw malformed("turn indices must be contiguous from 0");
    t.at = stamp(e, "at");
    t.query = str(e, "query");
    t.response = str(e, "response");
    t.model = str(e, "model");
    t.mode = str(e, "mode");
    auto chunks = integer(e, "chunk_count");
    if (chunks < 0) throw malformed("negative chunk_count");
    t.chunk_count = static_cast<std::size_t>(chunks);
    t.latency_assembly_ms = integer(e, "latency_assembly_ms");
    t.latency_inference_ms = integer(e, "latency_inference_ms");
    const auto& tok = field(e, "tokens");
    if (!tok.is_object()) throw malformed("tokens must be an object");
    t.tokens_sent = integer(tok, "sent");
    t.tokens_received = integer(tok, "received");
    try {
      t.cost = Decimal::parse(str(e, "cost"));
    } catch (const Error& err) {
      if (err.code() == ErrorCode::kMalformedLog) throw;
      throw malformed("cost is not a decimal");
    }
    t.error = opt_str(e, "error");
    auto fb = e.find("feedback");
    if (fb != e.end() && !fb->is_null()) {
      if (!fb->is_object()) throw malformed("feedback must be an object");
      Feedback f;
      auto thumbs = thumbs_from_string(str(*fb, "thumbs"));
      if (!thumbs) throw malformed("thumbs must be up or down");
      f.thumbs = *thumbs;
      f.note = opt_str(*fb, "note");
      f.at = stamp(*fb, "at");
      t.feedback = std::move(f);
    }
    log.turns.push_back(std::move(t));
  }
  return log;
}

std::vector<SessionLog> parse_session_logs(std::string_view jsonl) {
  std::vector<SessionLog> out;
  std::size_t n = 0;
  for (const auto& line : text::split_lines(jsonl)) {
    ++n;
    if (text::trim(line).empty()) continue;
    try {
      out.push_back(parse_session_log(line));
    } catch (const Error& e) {
      throw malformed(fmt::format("line {}: {}", n, e.detail()));
    }
  }
  return out;
}

std::vector<SessionLog> load_log_directory(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw Error(ErrorCode::kIoError, "not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".jsonl") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<SessionLog> out;
  for (const auto& f : files) {
    std::ifstream in(f, std::ios::binary);
    if (!in) throw Error(ErrorCode::kIoError, "cannot read " + f.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
      auto part = parse_session_logs(ss.str());
      std::move(part.begin(), part.end(), std::back_inserter(out));
    } catch (const Error& e) {
      throw malformed(fmt::format("{}: {}", f.filename().string(), e.detail()));
    }
  }
  return out;
}

}  // namespace clinctx::logs
