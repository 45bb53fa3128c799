#include "clinctx/automation.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "clinctx/concurrency.hpp"
#include "clinctx/error.hpp"
#include "clinctx/text.hpp"

namespace clinctx::automation {
namespace {

using nlohmann::json;
using ojson = nlohmann::ordered_json;

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

std::string req_str(const json& j, const char* key, ErrorCode code) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_string()) throw Error(code, fmt::format("{} must be a string", key));
  return it->get<std::string>();
}

std::int64_t req_int(const json& j, const char* key, ErrorCode code) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_number_integer()) throw Error(code, fmt::format("{} must be an integer", key));
  return it->get<std::int64_t>();
}

Timestamp req_time(const json& j, const char* key, ErrorCode code) {
  auto ts = try_parse_timestamp(req_str(j, key, code));
  if (!ts) throw Error(code, fmt::format("{} is not a timestamp", key));
  return *ts;
}

std::optional<std::string> opt_str(const json& j, const char* key, ErrorCode code) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw Error(code, fmt::format("{} must be a string", key));
  return it->get<std::string>();
}

template <typename E, std::size_t N>
E parse_enum(std::string_view s, const std::array<E, N>& values, std::string_view what, ErrorCode code) {
  for (auto v : values) {
    if (to_string(v) == s) return v;
  }
  throw Error(code, fmt::format("unknown {} {}", what, s));
}

std::string error_slug(ErrorCode code) {
  std::string name(clinctx::to_string(code));
  std::string out;
  for (std::size_t i = 0; i < name.size(); ++i) {
    char c = name[i];
    if (std::isupper(static_cast<unsigned char>(c))) {
      if (i > 0) out += '_';
      out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else {
      out += c;
    }
  }
  return out;
}

std::string file_safe(std::string_view s) {
  std::string out;
  for (char c : s) {
    bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
    out += ok ? c : '-';
  }
  return out;
}

ojson telemetry_json(const gateway::RequestTelemetry& t) {
  return ojson{{"request_id", t.request_id},
               {"model", t.model},
               {"latency_ms", t.latency_ms},
               {"tokens_sent", t.tokens_sent},
               {"tokens_received", t.tokens_received},
               {"error_code", t.error_code ? ojson(*t.error_code) : ojson(nullptr)},
               {"cost", t.cost.to_canonical()}};
}

gateway::RequestTelemetry parse_telemetry(const json& j) {
  constexpr auto code = ErrorCode::kMalformedLog;
  if (!j.is_object()) throw Error(code, "telemetry must be an object");
  gateway::RequestTelemetry t;
  t.request_id = req_str(j, "request_id", code);
  t.model = req_str(j, "model", code);
  t.latency_ms = req_int(j, "latency_ms", code);
  t.tokens_sent = req_int(j, "tokens_sent", code);
  t.tokens_received = req_int(j, "tokens_received", code);
  t.error_code = opt_str(j, "error_code", code);
  t.cost = Decimal::parse(req_str(j, "cost", code));
  return t;
}

}  // namespace

std::string_view to_string(TriggerType t) {
  switch (t) {
    case TriggerType::kScheduled: return "scheduled";
    case TriggerType::kBatch: return "batch";
    case TriggerType::kOnDemand: return "on_demand";
  }
  return "?";
}

std::string_view to_string(OutputChannel c) {
  switch (c) {
    case OutputChannel::kWorklist: return "worklist";
    case OutputChannel::kFile: return "file";
    case OutputChannel::kApi: return "api";
  }
  return "?";
}

std::string_view to_string(Comparator c) { return c == Comparator::kExact ? "exact" : "containment"; }
std::string_view to_string(PatientStatus s) { return s == PatientStatus::kOk ? "ok" : "error"; }
std::string_view to_string(Verdict v) { return v == Verdict::kAgree ? "agree" : "disagree"; }

void AutomationSpec::validate() const {
  auto bad = [&](const std::string& why) {
    return Error(ErrorCode::kInvalidParams, fmt::format("automation {}: {}", automation_id, why));
  };
  if (automation_id.empty()) throw bad("automation_id is empty");
  if (text::trim(prompt_template).empty()) throw bad("prompt_template is empty");
  if (kinds.empty()) throw bad("no data kinds selected");
  if (start > end) throw bad("start is after end");
  if (trigger.type == TriggerType::kScheduled && trigger.interval.count() <= 0) {
    throw bad("scheduled interval must be positive");
  }
  std::set<std::string> labels;
  for (const auto& l : label_set) {
    if (!labels.insert(normalize_for_compare(l)).second) throw bad("duplicate label " + l);
  }
}

timeline::ContextSelection AutomationSpec::selection_for(const std::string& patient_id) const {
  return {patient_id, kinds, start, end};
}

AutomationSpec parse_spec(std::string_view json_text) {
  constexpr auto code = ErrorCode::kConfigError;
  json j = json::parse(json_text.begin(), json_text.end(), nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw Error(code, "automation spec is not a JSON object");
  AutomationSpec s;
  s.automation_id = req_str(j, "automation_id", code);
  s.name = opt_str(j, "name", code).value_or(s.automation_id);
  s.system_prompt = opt_str(j, "system_prompt", code).value_or("");
  s.prompt_template = req_str(j, "prompt_template", code);
  if (j.contains("kinds")) {
    if (!j["kinds"].is_array()) throw Error(code, "kinds must be a list");
    for (const auto& k : j["kinds"]) {
      auto kind = k.is_string() ? timeline::kind_from_string(k.get<std::string>()) : std::nullopt;
      if (!kind) throw Error(code, "unknown kind " + k.dump());
      s.kinds.insert(*kind);
    }
  } else {
    s.kinds.insert(timeline::kAllKinds.begin(), timeline::kAllKinds.end());
  }
  if (j.contains("start")) s.start = req_time(j, "start", code);
  if (j.contains("end")) s.end = req_time(j, "end", code);
  if (j.contains("trigger")) {
    const auto& t = j["trigger"];
    if (!t.is_object()) throw Error(code, "trigger must be an object");
    s.trigger.type = parse_enum(req_str(t, "type", code),
                                std::array{TriggerType::kScheduled, TriggerType::kBatch, TriggerType::kOnDemand},
                                "trigger", code);
    if (s.trigger.type == TriggerType::kScheduled) {
      s.trigger.interval = std::chrono::minutes(req_int(t, "interval_minutes", code));
    }
  }
  s.preferred_model = opt_str(j, "preferred_model", code);
  if (auto c = opt_str(j, "output_channel", code)) {
    s.output_channel = parse_enum(*c, std::array{OutputChannel::kWorklist, OutputChannel::kFile, OutputChannel::kApi},
                                  "output channel", code);
  }
  if (auto c = opt_str(j, "comparator", code)) {
    s.comparator = parse_enum(*c, std::array{Comparator::kExact, Comparator::kContainment}, "comparator", code);
  }
  if (j.contains("label_set")) {
    if (!j["label_set"].is_array()) throw Error(code, "label_set must be a list");
    for (const auto& l : j["label_set"]) {
      if (!l.is_string()) throw Error(code, "labels must be strings");
      s.label_set.push_back(l.get<std::string>());
    }
  }
  s.validate();
  return s;
}

AutomationSpec load_spec(const std::filesystem::path& path) {
  try {
    return parse_spec(read_file(path));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kIoError) throw;
    throw Error(e.code(), path.filename().string() + ": " + e.detail());
  }
}

std::string spec_to_json(const AutomationSpec& s) {
  ojson j;
  j["automation_id"] = s.automation_id;
  j["name"] = s.name;
  j["system_prompt"] = s.system_prompt;
  j["prompt_template"] = s.prompt_template;
  ojson kinds = ojson::array();
  for (auto k : s.kinds) kinds.push_back(std::string(timeline::to_string(k)));
  j["kinds"] = kinds;
  j["start"] = format_timestamp(s.start);
  j["end"] = format_timestamp(s.end);
  ojson trig{{"type", std::string(to_string(s.trigger.type))}};
  if (s.trigger.type == TriggerType::kScheduled) trig["interval_minutes"] = s.trigger.interval.count();
  j["trigger"] = trig;
  j["preferred_model"] = s.preferred_model ? ojson(*s.preferred_model) : ojson(nullptr);
  j["output_channel"] = std::string(to_string(s.output_channel));
  j["comparator"] = std::string(to_string(s.comparator));
  j["label_set"] = s.label_set;
  return j.dump(2) + "\n";
}

void AutomationRegistry::add(AutomationSpec spec) {
  spec.validate();
  std::unique_lock lock(mu_);
  specs_[spec.automation_id] = std::move(spec);
}

AutomationSpec AutomationRegistry::get(const std::string& automation_id) const {
  std::shared_lock lock(mu_);
  auto it = specs_.find(automation_id);
  if (it == specs_.end()) throw Error(ErrorCode::kUnknownAutomation, automation_id);
  return it->second;
}

bool AutomationRegistry::contains(const std::string& automation_id) const {
  std::shared_lock lock(mu_);
  return specs_.contains(automation_id);
}

std::vector<std::string> AutomationRegistry::ids() const {
  std::shared_lock lock(mu_);
  std::vector<std::string> out;
  for (const auto& [id, _] : specs_) out.push_back(id);
  return out;
}

std::size_t AutomationRegistry::load_directory(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) add(load_spec(f));
  return files.size();
}

void TriggerScheduler::schedule(const AutomationSpec& spec, Timestamp now) {
  if (spec.trigger.type != TriggerType::kScheduled) return;
  entries_[spec.automation_id] = {spec.trigger.interval, now + spec.trigger.interval};
}

std::vector<std::string> TriggerScheduler::tick(Timestamp now) {
  std::vector<std::string> due;
  for (auto& [id, e] : entries_) {
    if (e.due > now) continue;
    due.push_back(id);
    auto behind = (now - e.due) / e.interval;
    e.due += e.interval * (behind + 1);
  }
  return due;
}

std::optional<Timestamp> TriggerScheduler::next_due(const std::string& automation_id) const {
  auto it = entries_.find(automation_id);
  if (it == entries_.end()) return std::nullopt;
  return it->second.due;
}

std::int64_t JobRun::tokens_sent() const {
  std::int64_t n = 0;
  for (const auto& p : patients) n += p.telemetry.tokens_sent;
  return n;
}

std::string job_to_json(const JobRun& run) {
  ojson j;
  j["job_id"] = run.job_id;
  j["automation_id"] = run.automation_id;
  j["started_at"] = format_timestamp(run.started_at);
  j["finished_at"] = format_timestamp(run.finished_at);
  j["latency_ms"] = run.latency_ms;
  j["error_count"] = run.error_count;
  ojson patients = ojson::array();
  for (const auto& p : run.patients) {
    patients.push_back(ojson{{"patient_id", p.patient_id},
                             {"status", std::string(to_string(p.status))},
                             {"output", p.output},
                             {"model", p.model},
                             {"mode", p.mode},
                             {"chunk_count", p.chunk_count},
                             {"telemetry", telemetry_json(p.telemetry)},
                             {"error_message", p.error_message}});
  }
  j["patients"] = std::move(patients);
  return j.dump(2) + "\n";
}

JobRun parse_job(std::string_view json_text) {
  constexpr auto code = ErrorCode::kMalformedLog;
  json j = json::parse(json_text.begin(), json_text.end(), nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw Error(code, "job run is not a JSON object");
  JobRun run;
  run.job_id = req_str(j, "job_id", code);
  run.automation_id = req_str(j, "automation_id", code);
  run.started_at = req_time(j, "started_at", code);
  run.finished_at = req_time(j, "finished_at", code);
  run.latency_ms = req_int(j, "latency_ms", code);
  run.error_count = static_cast<std::size_t>(req_int(j, "error_count", code));
  if (!j.contains("patients") || !j["patients"].is_array()) throw Error(code, "patients must be a list");
  std::size_t errors = 0;
  for (const auto& p : j["patients"]) {
    PatientResult r;
    r.patient_id = req_str(p, "patient_id", code);
    r.status = parse_enum(req_str(p, "status", code), std::array{PatientStatus::kOk, PatientStatus::kError}, "status", code);
    r.output = req_str(p, "output", code);
    r.model = req_str(p, "model", code);
    r.mode = req_str(p, "mode", code);
    r.chunk_count = static_cast<std::size_t>(req_int(p, "chunk_count", code));
    if (!p.contains("telemetry")) throw Error(code, "missing telemetry");
    r.telemetry = parse_telemetry(p["telemetry"]);
    r.error_message = req_str(p, "error_message", code);
    if (r.status == PatientStatus::kError) ++errors;
    run.patients.push_back(std::move(r));
  }
  if (errors != run.error_count) throw Error(code, "error_count disagrees with patient statuses");
  return run;
}

std::vector<JobRun> load_job_history(const std::filesystem::path& dir) {
  std::vector<JobRun> out;
  if (!std::filesystem::is_directory(dir)) return out;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (!e.is_regular_file() || e.path().extension() != ".json") continue;
    try {
      out.push_back(parse_job(read_file(e.path())));
    } catch (const Error& err) {
      throw Error(err.code(), e.path().filename().string() + ": " + err.detail());
    }
  }
  std::sort(out.begin(), out.end(), [](const JobRun& a, const JobRun& b) {
    if (a.started_at != b.started_at) return a.started_at < b.started_at;
    return a.job_id < b.job_id;
  });
  return out;
}

JobRun run_batch(const AutomationSpec& spec, const std::vector<std::string>& patient_ids, gateway::Gateway& gateway,
                 const timeline::TimelineStore& store, Clock& clock, const RunOptions& options) {
  if (patient_ids.empty()) throw Error(ErrorCode::kEmptyPatientSet, "automation " + spec.automation_id);
  std::vector<std::string> ids = patient_ids;
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());

  JobRun run;
  run.automation_id = spec.automation_id;
  run.started_at = clock.now();
  run.job_id = options.job_id.empty()
                   ? fmt::format("{}-{}", spec.automation_id, file_safe(format_timestamp(run.started_at)))
                   : options.job_id;
  run.patients.resize(ids.size());

  parallel_for(ids.size(), options.parallelism, [&](std::size_t i) {
    PatientResult& r = run.patients[i];
    r.patient_id = ids[i];
    r.telemetry.request_id = fmt::format("{}/{}", run.job_id, ids[i]);
    auto fail = [&](std::string code, std::string message) {
      r.status = PatientStatus::kError;
      r.telemetry.error_code = std::move(code);
      r.error_message = std::move(message);
    };
    try {
      auto tl = store.get(ids[i]);
      if (!tl) {
        fail("unknown_patient", "patient not in store: " + ids[i]);
        return;
      }
      auto text = timeline::serialize_for_context(timeline::filter(*tl, spec.selection_for(ids[i])));
      auto g = gateway.complete(spec.system_prompt, spec.prompt_template, std::move(text), r.telemetry.request_id,
                                spec.preferred_model);
      const auto& ex = g.execution;
      r.model = g.model;
      r.mode = std::string(context::to_string(g.mode));
      r.chunk_count = g.chunk_count;
      r.telemetry.model = g.model;
      r.telemetry.latency_ms = ex.latency_ms;
      r.telemetry.tokens_sent = ex.tokens_sent();
      r.telemetry.tokens_received = ex.tokens_received();
      r.telemetry.cost = ex.total_cost();
      if (ex.ok()) {
        r.output = *ex.response;
      } else {
        fail(ex.error_code, ex.error_message);
      }
    } catch (const Error& e) {
      fail(error_slug(e.code()), e.detail());
    }
  });

  // Simulated wall time: patients in id order onto the earliest free lane.
  std::vector<std::int64_t> lanes(std::clamp<std::size_t>(options.parallelism, 1, std::max<std::size_t>(ids.size(), 1)), 0);
  for (const auto& p : run.patients) {
    auto lane = std::min_element(lanes.begin(), lanes.end());
    *lane += p.telemetry.latency_ms;
    if (p.status == PatientStatus::kError) ++run.error_count;
  }
  run.latency_ms = *std::max_element(lanes.begin(), lanes.end());
  run.finished_at = run.started_at + std::chrono::milliseconds(run.latency_ms);
  return run;
}

std::string worklist_lines(const JobRun& run) {
  std::string out;
  for (const auto& p : run.patients) {
    if (p.status != PatientStatus::kOk) continue;
    ojson j{{"job_id", run.job_id},
            {"automation_id", run.automation_id},
            {"patient_id", p.patient_id},
            {"output", p.output},
            {"at", format_timestamp(run.finished_at)}};
    out += j.dump() + "\n";
  }
  return out;
}

std::vector<GoldStandardCase> parse_gold(std::string_view jsonl) {
  constexpr auto code = ErrorCode::kInvalidParams;
  std::vector<GoldStandardCase> out;
  std::size_t n = 0;
  for (const auto& line : text::split_lines(jsonl)) {
    ++n;
    if (text::trim(line).empty()) continue;
    json j = json::parse(line, nullptr, false);
    try {
      if (j.is_discarded() || !j.is_object()) throw Error(code, "not a JSON object");
      GoldStandardCase c;
      c.case_id = opt_str(j, "case_id", code).value_or(fmt::format("case-{}", out.size() + 1));
      c.patient_id = req_str(j, "patient_id", code);
      c.start = req_time(j, "start", code);
      c.end = req_time(j, "end", code);
      c.prompt = req_str(j, "prompt", code);
      c.expert_response = req_str(j, "expert_response", code);
      if (c.patient_id.empty() || c.prompt.empty() || c.expert_response.empty()) throw Error(code, "empty field");
      if (c.start > c.end) throw Error(code, "start is after end");
      out.push_back(std::move(c));
    } catch (const Error& e) {
      throw Error(code, fmt::format("gold line {}: {}", n, e.detail()));
    }
  }
  return out;
}

std::string gold_to_jsonl(const std::vector<GoldStandardCase>& cases) {
  std::string out;
  for (const auto& c : cases) {
    ojson j{{"case_id", c.case_id},
            {"patient_id", c.patient_id},
            {"start", format_timestamp(c.start)},
            {"end", format_timestamp(c.end)},
            {"prompt", c.prompt},
            {"expert_response", c.expert_response}};
    out += j.dump() + "\n";
  }
  return out;
}

std::string normalize_for_compare(std::string_view s) {
  std::string n = text::normalize_space(s);
  while (!n.empty() && (n.back() == '.' || n.back() == '!' || n.back() == ';' || n.back() == ':' || n.back() == ' ')) {
    n.pop_back();
  }
  return n;
}

bool outputs_match(Comparator comparator, std::string_view output, std::string_view expert) {
  auto o = normalize_for_compare(output);
  auto e = normalize_for_compare(expert);
  if (comparator == Comparator::kExact) return o == e;
  return !e.empty() && o.find(e) != std::string::npos;
}

std::string case_context(const AutomationSpec& spec, const GoldStandardCase& c, const timeline::TimelineStore& store) {
  auto tl = store.get(c.patient_id);
  if (!tl) throw Error(ErrorCode::kUnknownPatient, c.patient_id);
  timeline::ContextSelection sel{c.patient_id, spec.kinds, c.start, c.end};
  return timeline::serialize_for_context(timeline::filter(*tl, sel));
}

GoldEvaluation evaluate_against_gold(const AutomationSpec& spec, const std::vector<GoldStandardCase>& dataset,
                                     gateway::Gateway& gateway, const timeline::TimelineStore& store,
                                     std::size_t parallelism) {
  if (dataset.empty()) throw Error(ErrorCode::kEmptyDataset, "automation " + spec.automation_id);
  if (!spec.label_set.empty()) {
    std::set<std::string> labels;
    for (const auto& l : spec.label_set) labels.insert(normalize_for_compare(l));
    for (const auto& c : dataset) {
      if (!labels.contains(normalize_for_compare(c.expert_response))) {
        throw Error(ErrorCode::kInvalidParams,
                    fmt::format("case {} expects {}, which is not in the label set", c.case_id, c.expert_response));
      }
    }
  }
  GoldEvaluation ev;
  ev.automation_id = spec.automation_id;
  ev.cases = dataset.size();
  ev.results.resize(dataset.size());
  parallel_for(dataset.size(), parallelism, [&](std::size_t i) {
    const auto& c = dataset[i];
    CaseResult& r = ev.results[i];
    r.case_id = c.case_id;
    r.patient_id = c.patient_id;
    r.expected = c.expert_response;
    try {
      auto g = gateway.complete(spec.system_prompt, c.prompt, case_context(spec, c, store),
                                fmt::format("bench-{}-{}", spec.automation_id, c.case_id), spec.preferred_model);
      if (g.execution.ok()) {
        r.output = *g.execution.response;
        r.match = outputs_match(spec.comparator, r.output, r.expected);
      } else {
        r.error = g.execution.error_code;
      }
    } catch (const Error& e) {
      r.error = error_slug(e.code());
    }
  });
  for (const auto& r : ev.results) {
    ev.matches += r.match ? 1 : 0;
    ev.errors += r.error ? 1 : 0;
  }
  ev.agreement_rate = static_cast<double>(ev.matches) / static_cast<double>(ev.cases);
  return ev;
}

FeedbackStore::FeedbackStore(const AutomationRegistry& registry, std::optional<std::filesystem::path> file)
    : registry_(registry), file_(std::move(file)) {}

std::string feedback_to_json_line(const FeedbackRecord& rec) {
  ojson j{{"automation_id", rec.automation_id},
          {"patient_id", rec.patient_id},
          {"verdict", std::string(to_string(rec.verdict))},
          {"note", rec.note ? ojson(*rec.note) : ojson(nullptr)},
          {"recorded_at", format_timestamp(rec.recorded_at)}};
  return j.dump();
}

FeedbackRecord parse_feedback_line(std::string_view line) {
  constexpr auto code = ErrorCode::kMalformedLog;
  json j = json::parse(line.begin(), line.end(), nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw Error(code, "feedback line is not a JSON object");
  FeedbackRecord r;
  r.automation_id = req_str(j, "automation_id", code);
  r.patient_id = req_str(j, "patient_id", code);
  r.verdict = parse_enum(req_str(j, "verdict", code), std::array{Verdict::kAgree, Verdict::kDisagree}, "verdict", code);
  r.note = opt_str(j, "note", code);
  r.recorded_at = req_time(j, "recorded_at", code);
  return r;
}

void FeedbackStore::record(const FeedbackRecord& rec) {
  if (!registry_.contains(rec.automation_id)) throw Error(ErrorCode::kUnknownAutomation, rec.automation_id);
  std::lock_guard lock(mu_);
  if (file_) {
    std::filesystem::create_directories(file_->parent_path());
    std::ofstream out(*file_, std::ios::binary | std::ios::app);
    if (!out) throw Error(ErrorCode::kIoError, "cannot append to " + file_->string());
    out << feedback_to_json_line(rec) << '\n';
  }
  records_.push_back(rec);
}

std::vector<FeedbackRecord> FeedbackStore::records(const std::string& automation_id) const {
  std::lock_guard lock(mu_);
  std::vector<FeedbackRecord> out;
  for (const auto& r : records_) {
    if (r.automation_id == automation_id) out.push_back(r);
  }
  return out;
}

FeedbackSummary FeedbackStore::summary(const std::string& automation_id) const {
  FeedbackSummary s;
  for (const auto& r : records(automation_id)) (r.verdict == Verdict::kAgree ? s.agree : s.disagree)++;
  return s;
}

std::size_t FeedbackStore::load() {
  if (!file_ || !std::filesystem::exists(*file_)) return 0;
  std::vector<FeedbackRecord> loaded;
  for (const auto& line : text::split_lines(read_file(*file_))) {
    if (!text::trim(line).empty()) loaded.push_back(parse_feedback_line(line));
  }
  std::lock_guard lock(mu_);
  records_.insert(records_.end(), loaded.begin(), loaded.end());
  return loaded.size();
}

GoldStandardCase append_to_gold(const AutomationSpec& spec, const FeedbackRecord& rec, const std::string& output,
                                std::vector<GoldStandardCase>& dataset) {
  if (rec.automation_id != spec.automation_id) {
    throw Error(ErrorCode::kUnknownAutomation, fmt::format("feedback for {} given to {}", rec.automation_id, spec.automation_id));
  }
  GoldStandardCase c;
  c.case_id = fmt::format("fb-{}", dataset.size() + 1);
  c.patient_id = rec.patient_id;
  c.start = spec.start;
  c.end = spec.end;
  c.prompt = spec.prompt_template;
  if (rec.verdict == Verdict::kAgree) {
    c.expert_response = output;
  } else {
    if (!rec.note || text::trim(*rec.note).empty()) {
      throw Error(ErrorCode::kInvalidParams, "a disagree verdict needs the corrected response in its note");
    }
    c.expert_response = *rec.note;
  }
  if (text::trim(c.expert_response).empty()) throw Error(ErrorCode::kInvalidParams, "empty expert response");
  dataset.push_back(c);
  return c;
}

IntegrityReport integrity_report(const std::string& automation_id, const std::vector<JobRun>& history) {
  IntegrityReport r;
  r.automation_id = automation_id;
  std::int64_t latency_total = 0;
  for (const auto& job : history) {
    if (job.automation_id != automation_id) continue;
    ++r.total_executions;
    r.patients += job.patients.size();
    r.errors += job.error_count;
    latency_total += job.latency_ms;
    for (const auto& p : job.patients) {
      r.tokens_sent += p.telemetry.tokens_sent;
      if (p.status == PatientStatus::kError) ++r.error_codes[p.telemetry.error_code.value_or("unknown")];
    }
  }
  if (r.total_executions == 0) throw Error(ErrorCode::kNoHistory, "automation " + automation_id);
  if (r.patients > 0) r.mean_tokens_per_patient = static_cast<double>(r.tokens_sent) / static_cast<double>(r.patients);
  r.mean_latency_s = static_cast<double>(latency_total) / 1000.0 / static_cast<double>(r.total_executions);
  return r;
}

std::string render_integrity(const IntegrityReport& r, const std::optional<FeedbackSummary>& feedback) {
  std::string out = fmt::format("automation {}\n", r.automation_id);
  out += fmt::format("  executions: {}  patients: {}  errors: {}\n", r.total_executions, r.patients, r.errors);
  out += fmt::format("  tokens sent: {} ({} per patient)\n", text::group_thousands(r.tokens_sent),
                     text::group_thousands(std::llround(r.mean_tokens_per_patient)));
  out += fmt::format("  mean job latency: {:.1f}s\n", r.mean_latency_s);
  for (const auto& [code, n] : r.error_codes) out += fmt::format("  error {}: {}\n", code, n);
  if (feedback) {
    out += fmt::format("  feedback: {} agree / {} disagree ({} positive)\n", feedback->agree, feedback->disagree,
                       text::format_percent(feedback->positive_rate(), 2));
  }
  return out;
}

std::string integrity_to_json(const IntegrityReport& r, const std::optional<FeedbackSummary>& feedback) {
  ojson j;
  j["automation_id"] = r.automation_id;
  j["total_executions"] = r.total_executions;
  j["patients"] = r.patients;
  j["errors"] = r.errors;
  j["tokens_sent"] = r.tokens_sent;
  j["mean_tokens_per_patient"] = r.mean_tokens_per_patient;
  j["mean_latency_s"] = r.mean_latency_s;
  j["error_codes"] = ojson::object();
  for (const auto& [code, n] : r.error_codes) j["error_codes"][code] = n;
  if (feedback) {
    j["feedback"] = ojson{{"agree", feedback->agree},
                          {"disagree", feedback->disagree},
                          {"positive_rate", feedback->positive_rate()}};
  }
  return j.dump(2) + "\n";
}

std::filesystem::path snapshot_path(const std::filesystem::path& dir, const AutomationSpec& spec,
                                    const GoldStandardCase& c) {
  return dir / file_safe(spec.automation_id) /
         (file_safe(fmt::format("{}_{}_{}", c.patient_id, format_timestamp(c.start), format_timestamp(c.end))) + ".txt");
}

void take_snapshots(const AutomationSpec& spec, const std::vector<GoldStandardCase>& subset,
                    const timeline::TimelineStore& store, const std::filesystem::path& dir) {
  for (const auto& c : subset) write_file(snapshot_path(dir, spec, c), case_context(spec, c, store));
}

std::vector<std::string> drift_check(const AutomationSpec& spec, const std::vector<GoldStandardCase>& subset,
                                     const timeline::TimelineStore& store, const std::filesystem::path& dir) {
  std::set<std::string> changed;
  for (const auto& c : subset) {
    auto path = snapshot_path(dir, spec, c);
    if (!std::filesystem::exists(path)) throw Error(ErrorCode::kMissingSnapshot, path.string());
    if (read_file(path) != case_context(spec, c, store)) changed.insert(c.patient_id);
  }
  return {changed.begin(), changed.end()};
}

}  // namespace clinctx::automation
