#include <CLI11.hpp>
#include <fmt/format.h>

#include <atomic>
#include <chrono>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <optional>
#include <sstream>
#include <string>
#include <thread>

#include "clinctx/automation.hpp"
#include "clinctx/chat.hpp"
#include "clinctx/claims.hpp"
#include "clinctx/config.hpp"
#include "clinctx/error.hpp"
#include "clinctx/metrics.hpp"
#include "clinctx/pipelines.hpp"
#include "clinctx/platform.hpp"
#include "clinctx/server.hpp"
#include "clinctx/session_log.hpp"
#include "clinctx/synth.hpp"
#include "clinctx/tasks.hpp"
#include "clinctx/text.hpp"
#include "clinctx/value.hpp"

namespace fs = std::filesystem;
using namespace clinctx;

namespace {

constexpr int kUsageError = 1;
constexpr int kRuntimeError = 2;

// Used when neither --config nor CLINCTX_CONFIG is given: one mock model and
// every backend on its offline default.
constexpr std::string_view kDefaultConfig = R"({
  "models": [{"name": "default", "window_tokens": 128000,
              "input_price_per_1k": "0.003", "output_price_per_1k": "0.015"}]
})";

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out << content;
}

// Writes to `path` when given, stdout otherwise.
void emit(const std::string& path, std::string_view content) {
  if (path.empty() || path == "-") {
    std::cout << content;
  } else {
    write_file(path, content);
  }
}

struct Globals {
  std::string config;
};

config::PlatformConfig load_platform_config(const Globals& g) {
  std::optional<std::string> flag;
  if (!g.config.empty()) flag = g.config;
  const char* env = std::getenv("CLINCTX_CONFIG");
  if (!flag && !(env && *env)) return config::parse_config(std::string(kDefaultConfig), fs::current_path());
  return config::load_config(config::resolve_config_path(flag));
}

std::vector<logs::SessionLog> load_logs(const fs::path& path) {
  if (fs::is_directory(path)) return logs::load_log_directory(path);
  return logs::parse_session_logs(read_file(path));
}

// ---- serve ----------------------------------------------------------------

struct ServeArgs {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string port_file;
};

int run_serve(const Globals& g, const ServeArgs& a) {
  Platform platform(load_platform_config(g));
  auto& store = platform.store();
  chat::ChatService::Options opts;
  opts.system_prompt = platform.chat_system_prompt();
  opts.preferred_model = platform.config().preferred_model;
  chat::ChatService chat(store, platform.gateway("chat"), platform.clock(), opts);
  server::Api api(chat, store, platform.config().paths.logs);
  server::HttpServer http(api);
  int port = http.bind(a.host, a.port);
  if (port < 0) throw Error(ErrorCode::kIoError, fmt::format("cannot bind {}:{}", a.host, a.port));
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::jthread watcher([&](std::stop_token st) {
    while (!g_stop && !st.stop_requested()) std::this_thread::sleep_for(std::chrono::milliseconds(50));
    http.stop();
  });
  std::cout << fmt::format("listening on {}:{} ({} patients)", a.host, port, store.size()) << std::endl;
  if (!a.port_file.empty()) write_file(a.port_file, std::to_string(port) + "\n");
  http.listen();
  watcher.request_stop();
  return 0;
}

// ---- automation ------------------------------------------------------------

struct AutomationArgs {
  std::string id;
  std::string patients;  // comma separated; empty -> whole store
  std::string job_id;
  std::string gold;
  std::string out;
  bool json = false;
  std::string patient;
  std::string verdict;
  std::string note;
};

void load_registry(const config::PlatformConfig& c, automation::AutomationRegistry& reg) {
  if (fs::is_directory(c.paths.automations)) reg.load_directory(c.paths.automations);
}

automation::AutomationSpec find_spec(const config::PlatformConfig& c, const std::string& id) {
  automation::AutomationRegistry reg;
  load_registry(c, reg);
  return reg.get(id);
}

fs::path gold_path(const config::PlatformConfig& c, const AutomationArgs& a) {
  return a.gold.empty() ? c.paths.gold / (a.id + ".jsonl") : fs::path(a.gold);
}

int run_automation_run(const Globals& g, const AutomationArgs& a) {
  Platform p(load_platform_config(g));
  auto spec = find_spec(p.config(), a.id);
  std::vector<std::string> ids;
  if (a.patients.empty()) {
    ids = p.store().patient_ids();
  } else {
    std::stringstream ss(a.patients);
    for (std::string id; std::getline(ss, id, ',');) {
      if (!id.empty()) ids.push_back(id);
    }
  }
  automation::RunOptions opts;
  opts.parallelism = p.config().parallelism;
  opts.job_id = a.job_id;
  auto run = automation::run_batch(spec, ids, p.gateway("automation"), p.store(), p.clock(), opts);
  write_file(p.config().paths.jobs / (run.job_id + ".json"), automation::job_to_json(run));
  if (spec.output_channel == automation::OutputChannel::kWorklist) {
    write_file(p.config().paths.worklists / (run.job_id + ".jsonl"), automation::worklist_lines(run));
  }
  if (a.json) {
    emit(a.out, automation::job_to_json(run));
  } else {
    emit(a.out, fmt::format("job {}: {} patients, {} errors, {} tokens sent, latency {:.1f}s\n", run.job_id,
                            run.patients.size(), run.error_count, run.tokens_sent(),
                            static_cast<double>(run.latency_ms) / 1000.0));
  }
  return 0;
}

int run_automation_bench(const Globals& g, const AutomationArgs& a) {
  Platform p(load_platform_config(g));
  auto spec = find_spec(p.config(), a.id);
  auto gold = automation::parse_gold(read_file(gold_path(p.config(), a)));
  auto ev = automation::evaluate_against_gold(spec, gold, p.gateway("automation"), p.store(), p.config().parallelism);
  if (a.json) {
    nlohmann::ordered_json j{{"automation_id", ev.automation_id}, {"cases", ev.cases}, {"matches", ev.matches},
                             {"errors", ev.errors},            {"agreement_rate", ev.agreement_rate}};
    auto rows = nlohmann::ordered_json::array();
    for (const auto& r : ev.results) {
      rows.push_back({{"case_id", r.case_id}, {"patient_id", r.patient_id}, {"match", r.match},
                      {"output", r.output}, {"expected", r.expected},
                      {"error", r.error ? nlohmann::ordered_json(*r.error) : nlohmann::ordered_json(nullptr)}});
    }
    j["results"] = rows;
    emit(a.out, j.dump(2) + "\n");
  } else {
    std::string body = fmt::format("automation {}: {}/{} cases agree ({}), {} errors\n", ev.automation_id,
                                   ev.matches, ev.cases, text::format_percent(ev.agreement_rate, 1), ev.errors);
    for (const auto& r : ev.results) {
      if (!r.match) body += fmt::format("  mismatch {} ({})\n", r.case_id, r.patient_id);
    }
    emit(a.out, body);
  }
  return 0;
}

int run_automation_report(const Globals& g, const AutomationArgs& a) {
  Platform p(load_platform_config(g));
  automation::AutomationRegistry reg;
  load_registry(p.config(), reg);
  auto history = fs::is_directory(p.config().paths.jobs) ? automation::load_job_history(p.config().paths.jobs)
                                                        : std::vector<automation::JobRun>{};
  auto report = automation::integrity_report(a.id, history);
  std::optional<automation::FeedbackSummary> fb;
  if (reg.contains(a.id) && fs::exists(p.config().paths.feedback)) {
    automation::FeedbackStore store(reg, p.config().paths.feedback);
    store.load();
    auto s = store.summary(a.id);
    if (s.agree + s.disagree > 0) fb = s;
  }
  emit(a.out, a.json ? automation::integrity_to_json(report, fb) : automation::render_integrity(report, fb));
  return 0;
}

int run_automation_feedback(const Globals& g, const AutomationArgs& a) {
  Platform p(load_platform_config(g));
  automation::AutomationRegistry reg;
  load_registry(p.config(), reg);
  automation::FeedbackRecord rec;
  rec.automation_id = a.id;
  rec.patient_id = a.patient;
  if (a.verdict == "agree") rec.verdict = automation::Verdict::kAgree;
  else if (a.verdict == "disagree") rec.verdict = automation::Verdict::kDisagree;
  else throw Error(ErrorCode::kInvalidParams, "verdict must be agree or disagree");
  if (!a.note.empty()) rec.note = a.note;
  rec.recorded_at = p.clock().now();
  automation::FeedbackStore store(reg, p.config().paths.feedback);
  store.record(rec);
  std::cout << automation::feedback_to_json_line(rec) << "\n";
  return 0;
}

int run_automation_snapshot(const Globals& g, const AutomationArgs& a, bool drift) {
  Platform p(load_platform_config(g));
  auto spec = find_spec(p.config(), a.id);
  auto gold = automation::parse_gold(read_file(gold_path(p.config(), a)));
  if (!drift) {
    automation::take_snapshots(spec, gold, p.store(), p.config().paths.snapshots);
    std::cout << fmt::format("{} snapshots written for {}\n", gold.size(), a.id);
    return 0;
  }
  auto changed = automation::drift_check(spec, gold, p.store(), p.config().paths.snapshots);
  if (changed.empty()) {
    std::cout << "no drift\n";
    return 0;
  }
  std::cout << "drift in:";
  for (const auto& id : changed) std::cout << " " << id;
  std::cout << "\n";
  return 0;
}

// ---- eval ------------------------------------------------------------------

struct EvalArgs {
  std::string logs;
  double sample = 0.10;
  std::optional<std::uint64_t> seed;
  std::size_t top_k = claims::kDefaultTopK;
  std::size_t k = tasks::kDefaultClusters;
  double merge_threshold = tasks::kDefaultMergeThreshold;
  std::string annotations;
  std::string catalog;
  std::string out;
  std::string json_out;
  std::size_t top_n = 20;
};

fs::path logs_path(const config::PlatformConfig& c, const std::string& flag) {
  return flag.empty() ? c.paths.logs : fs::path(flag);
}

int run_eval_claims(const Globals& g, const EvalArgs& a) {
  Platform p(load_platform_config(g));
  auto sessions = load_logs(logs_path(p.config(), a.logs));
  auto gens = pipelines::generations_from_logs(sessions, p.backend("linguistic"), p.config().parallelism);
  claims::ScoreOptions opts;
  opts.sample_fraction = a.sample;
  opts.seed = a.seed.value_or(p.config().seed);
  opts.top_k = a.top_k;
  opts.parallelism = p.config().parallelism;
  auto report = claims::score_corpus(gens, p.embedder(), p.backend("entailment"), p.backend("claim_classifier"), opts);
  if (!a.json_out.empty()) write_file(a.json_out, claims::report_to_json(report));
  emit(a.out, claims::render_report_text(report));
  return 0;
}

int run_eval_tasks(const Globals& g, const EvalArgs& a) {
  Platform p(load_platform_config(g));
  auto sessions = load_logs(logs_path(p.config(), a.logs));
  auto queries = pipelines::queries_from_logs(sessions);
  auto catalog = a.catalog.empty() ? tasks::TaskCatalog::builtin() : tasks::TaskCatalog::from_file(a.catalog);
  tasks::LabelOptions opts;
  opts.k = a.k;
  opts.seed = a.seed.value_or(p.config().seed);
  opts.merge_threshold = a.merge_threshold;
  opts.parallelism = p.config().parallelism;
  auto result = tasks::label_queries(queries, catalog, p.backend("task_normalizer"), p.backend("linguistic"),
                                     p.embedder(), opts);
  auto report = tasks::build_report(result);
  std::string body = tasks::render_report_text(report, a.top_n);
  if (!a.annotations.empty()) {
    auto agreement = tasks::agreement_rate(result.labels, tasks::parse_annotations(read_file(a.annotations)));
    body += fmt::format("\nannotator agreement: {}\n", text::format_percent(agreement.average, 1));
    for (const auto& [who, rate] : agreement.per_annotator) {
      body += fmt::format("  {}: {}\n", who, text::format_percent(rate, 1));
    }
  }
  if (!a.json_out.empty()) write_file(a.json_out, tasks::report_to_json(report));
  emit(a.out, body);
  return 0;
}

// ---- report / value / synthetic data ----------------------------------------

struct ReportArgs {
  std::string logs;
  double latency_bin = metrics::kDefaultLatencyBinSeconds;
  double token_bin = metrics::kDefaultTokenBin;
  bool json = false;
  std::string out;
};

int run_report_metrics(const Globals& g, const ReportArgs& a) {
  auto cfg = load_platform_config(g);
  metrics::MetricsStore store;
  fs::path path = logs_path(cfg, a.logs);
  if (fs::is_directory(path)) store.ingest_directory(path);
  else store.ingest_jsonl(read_file(path));
  auto report = metrics::build_report(store.sessions(), a.latency_bin, a.token_bin);
  emit(a.out, a.json ? metrics::report_to_json(report) : metrics::render_report_text(report));
  return 0;
}

struct ValueArgs {
  std::string file;
  std::string stage = "both";
  bool json = false;
};

int run_value_project(const ValueArgs& a) {
  auto projection = value::project(value::load_scenario(a.file));
  std::cout << (a.json ? value::projection_to_json(projection) : value::render_projection(projection, a.stage));
  return 0;
}

struct SynthArgs {
  std::size_t n = 20;
  std::uint64_t seed = 0;
  std::string out = "patients";
  std::size_t sessions = 0;
  std::string logs_out;
};

int run_gen_patients(const SynthArgs& a) {
  synth::PatientOptions opts;
  opts.patients = a.n;
  opts.seed = a.seed;
  auto patients = synth::generate_patients(opts);
  synth::write_patients(a.out, patients);
  std::cout << fmt::format("wrote {} patients to {}\n", patients.size(), a.out);
  if (a.sessions > 0) {
    synth::LogOptions lo;
    lo.sessions = a.sessions;
    lo.seed = a.seed;
    for (const auto& p : patients) lo.patient_ids.push_back(p.patient_id);
    std::string lines;
    for (const auto& s : synth::generate_session_logs(lo)) lines += logs::to_json_line(s) + "\n";
    fs::path target = a.logs_out.empty() ? fs::path(a.out) / "logs" / "sessions.jsonl" : fs::path(a.logs_out);
    write_file(target, lines);
    std::cout << fmt::format("wrote {} sessions to {}\n", a.sessions, target.string());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"clinctx: patient-context chat, automations, evaluation and reporting"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "Platform config file (default: $CLINCTX_CONFIG)");

  ServeArgs serve;
  auto* serve_cmd = app.add_subcommand("serve", "Run the chat HTTP API");
  serve_cmd->add_option("--host", serve.host, "Bind address");
  serve_cmd->add_option("--port", serve.port, "Port (0 picks a free one)");
  serve_cmd->add_option("--port-file", serve.port_file, "Write the bound port here once listening");

  AutomationArgs aut;
  auto* aut_cmd = app.add_subcommand("automation", "Run and monitor automations");
  aut_cmd->require_subcommand(1);
  auto* aut_run = aut_cmd->add_subcommand("run", "Run a batch over patients");
  aut_run->add_option("id", aut.id, "Automation id")->required();
  aut_run->add_option("--patients", aut.patients, "Comma-separated patient ids (default: all)");
  aut_run->add_option("--job-id", aut.job_id, "Job id");
  auto* aut_bench = aut_cmd->add_subcommand("bench", "Benchmark against the gold-standard set");
  aut_bench->add_option("id", aut.id, "Automation id")->required();
  aut_bench->add_option("--gold", aut.gold, "Gold JSONL (default: <gold dir>/<id>.jsonl)");
  auto* aut_report = aut_cmd->add_subcommand("report", "System-integrity report from job history");
  aut_report->add_option("id", aut.id, "Automation id")->required();
  auto* aut_fb = aut_cmd->add_subcommand("feedback", "Record agree/disagree feedback");
  aut_fb->add_option("id", aut.id, "Automation id")->required();
  aut_fb->add_option("patient", aut.patient, "Patient id")->required();
  aut_fb->add_option("--verdict", aut.verdict, "agree | disagree")->required();
  aut_fb->add_option("--note", aut.note, "Free-text note");
  auto* aut_snap = aut_cmd->add_subcommand("snapshot", "Snapshot gold-case contexts");
  aut_snap->add_option("id", aut.id, "Automation id")->required();
  aut_snap->add_option("--gold", aut.gold, "Gold JSONL");
  auto* aut_drift = aut_cmd->add_subcommand("drift", "Compare gold-case contexts to snapshots");
  aut_drift->add_option("id", aut.id, "Automation id")->required();
  aut_drift->add_option("--gold", aut.gold, "Gold JSONL");
  for (auto* c : {aut_run, aut_bench, aut_report}) {
    c->add_flag("--json", aut.json, "Structured output");
    c->add_option("--out", aut.out, "Output file (default: stdout)");
  }

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate logged generations");
  eval_cmd->require_subcommand(1);
  auto* eval_claims = eval_cmd->add_subcommand("claims", "Unsupported-claim evaluation");
  eval_claims->add_option("--sample", ev.sample, "Session sample fraction")->check(CLI::Range(0.0, 1.0));
  eval_claims->add_option("--top-k", ev.top_k, "Source chunks retrieved per summary chunk");
  auto* eval_tasks = eval_cmd->add_subcommand("tasks", "Task categorization and feedback by task");
  eval_tasks->add_option("--k", ev.k, "Cluster count");
  eval_tasks->add_option("--merge-threshold", ev.merge_threshold, "Cosine distance for merging clusters");
  eval_tasks->add_option("--annotations", ev.annotations, "Annotator judgments (JSONL)");
  eval_tasks->add_option("--catalog", ev.catalog, "Task catalog file");
  eval_tasks->add_option("--top", ev.top_n, "Medical tasks shown");
  for (auto* c : {eval_claims, eval_tasks}) {
    c->add_option("--logs", ev.logs, "Session-log file or directory");
    c->add_option("--seed", ev.seed, "Seed (default: config seed)");
    c->add_option("--out", ev.out, "Text report file (default: stdout)");
    c->add_option("--json-out", ev.json_out, "Structured report file");
  }

  ReportArgs rep;
  auto* report_cmd = app.add_subcommand("report", "Usage reports");
  report_cmd->require_subcommand(1);
  auto* report_metrics = report_cmd->add_subcommand("metrics", "Usage, latency and token metrics");
  report_metrics->add_option("--logs", rep.logs, "Session-log file or directory");
  report_metrics->add_option("--latency-bin", rep.latency_bin, "Latency bin width in seconds");
  report_metrics->add_option("--token-bin", rep.token_bin, "Token bin width");
  report_metrics->add_flag("--json", rep.json, "Structured output");
  report_metrics->add_option("--out", rep.out, "Output file (default: stdout)");

  ValueArgs val;
  auto* value_cmd = app.add_subcommand("value", "Value projections");
  value_cmd->require_subcommand(1);
  auto* value_project = value_cmd->add_subcommand("project", "Project annual value for a scenario");
  value_project->add_option("file", val.file, "Scenario JSON")->required()->check(CLI::ExistingFile);
  value_project->add_option("--stage", val.stage, "first_year | steady_state | both")
      ->check(CLI::IsMember({"first_year", "steady_state", "both"}));
  value_project->add_flag("--json", val.json, "Structured output");

  SynthArgs syn;
  auto* gen_cmd = app.add_subcommand("gen-synthetic-patients", "Write synthetic patient bundles");
  gen_cmd->add_option("--n", syn.n, "Patient count");
  gen_cmd->add_option("--seed", syn.seed, "Seed");
  gen_cmd->add_option("--out", syn.out, "Output directory");
  gen_cmd->add_option("--sessions", syn.sessions, "Also write this many synthetic session logs");
  gen_cmd->add_option("--logs-out", syn.logs_out, "Session-log file (default: <out>/logs/sessions.jsonl)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return kUsageError;
  }

  try {
    if (*serve_cmd) return run_serve(g, serve);
    if (*aut_run) return run_automation_run(g, aut);
    if (*aut_bench) return run_automation_bench(g, aut);
    if (*aut_report) return run_automation_report(g, aut);
    if (*aut_fb) return run_automation_feedback(g, aut);
    if (*aut_snap) return run_automation_snapshot(g, aut, false);
    if (*aut_drift) return run_automation_snapshot(g, aut, true);
    if (*eval_claims) return run_eval_claims(g, ev);
    if (*eval_tasks) return run_eval_tasks(g, ev);
    if (*report_metrics) return run_report_metrics(g, rep);
    if (*value_project) return run_value_project(val);
    if (*gen_cmd) return run_gen_patients(syn);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
  std::cerr << app.help();
  return kUsageError;
}
