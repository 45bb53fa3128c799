#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include "clinctx/decimal.hpp"
#include "clinctx/gateway.hpp"
#include "clinctx/time.hpp"
#include "clinctx/timeline.hpp"

namespace clinctx::automation {

enum class TriggerType { kScheduled, kBatch, kOnDemand };
enum class OutputChannel { kWorklist, kFile, kApi };
enum class Comparator { kExact, kContainment };
std::string_view to_string(TriggerType t);
std::string_view to_string(OutputChannel c);
std::string_view to_string(Comparator c);

struct Trigger {
  TriggerType type = TriggerType::kBatch;
  std::chrono::minutes interval{0};  // scheduled only
};

struct AutomationSpec {
  std::string automation_id;
  std::string name;
  std::string system_prompt;    // may be empty
  std::string prompt_template;  // `{record_text}` marks where the record goes
  std::set<timeline::ResourceKind> kinds;
  Timestamp start = timeline::earliest_timestamp();
  Timestamp end = timeline::latest_timestamp();
  Trigger trigger;
  std::optional<std::string> preferred_model;
  OutputChannel output_channel = OutputChannel::kWorklist;
  Comparator comparator = Comparator::kExact;
  std::vector<std::string> label_set;  // empty for free-text outputs

  // Throws Error(kInvalidParams).
  void validate() const;
  timeline::ContextSelection selection_for(const std::string& patient_id) const;
};

// Throws Error(kConfigError) on schema problems, Error(kInvalidParams) on
// invalid values.
AutomationSpec parse_spec(std::string_view json_text);
AutomationSpec load_spec(const std::filesystem::path& path);
std::string spec_to_json(const AutomationSpec& spec);

class AutomationRegistry {
 public:
  void add(AutomationSpec spec);
  // Throws Error(kUnknownAutomation).
  AutomationSpec get(const std::string& automation_id) const;
  bool contains(const std::string& automation_id) const;
  std::vector<std::string> ids() const;
  std::size_t load_directory(const std::filesystem::path& dir);

 private:
  mutable std::shared_mutex mu_;
  std::map<std::string, AutomationSpec> specs_;
};

// Scheduled triggers advance only when tick() is called with a time.
class TriggerScheduler {
 public:
  // First run is due one interval after `now`. Non-scheduled specs are ignored.
  void schedule(const AutomationSpec& spec, Timestamp now);
  // Ids due at `now` in id order; each fires at most once per tick and its
  // next due time moves past `now` by whole intervals.
  std::vector<std::string> tick(Timestamp now);
  std::optional<Timestamp> next_due(const std::string& automation_id) const;

 private:
  struct Entry {
    std::chrono::minutes interval;
    Timestamp due;
  };
  std::map<std::string, Entry> entries_;
};

enum class PatientStatus { kOk, kError };
std::string_view to_string(PatientStatus s);

struct PatientResult {
  std::string patient_id;
  PatientStatus status = PatientStatus::kOk;
  std::string output;
  std::string model;
  std::string mode;
  std::size_t chunk_count = 0;
  // Aggregated over every request made for this patient.
  gateway::RequestTelemetry telemetry;
  std::string error_message;

  bool operator==(const PatientResult&) const = default;
};

struct JobRun {
  std::string job_id;
  std::string automation_id;
  Timestamp started_at{};
  Timestamp finished_at{};
  // Makespan of the per-patient latencies list-scheduled over the job's
  // parallelism in patient order.
  std::int64_t latency_ms = 0;
  std::vector<PatientResult> patients;  // sorted by patient_id
  std::size_t error_count = 0;

  std::int64_t tokens_sent() const;
  bool operator==(const JobRun&) const = default;
};

std::string job_to_json(const JobRun& run);
JobRun parse_job(std::string_view json_text);  // Error(kMalformedLog)
// Every *.json file in `dir`, ordered by started_at then job_id.
std::vector<JobRun> load_job_history(const std::filesystem::path& dir);

struct RunOptions {
  std::size_t parallelism = 4;
  std::string job_id;  // defaults to "<automation_id>-<started_at>"
};

// Per-patient failures (unknown patient, backend error) are recorded on the
// patient entry; the job always completes. Throws Error(kEmptyPatientSet).
JobRun run_batch(const AutomationSpec& spec, const std::vector<std::string>& patient_ids,
                 gateway::Gateway& gateway, const timeline::TimelineStore& store, Clock& clock,
                 const RunOptions& options = {});

// One JSON line per successful patient.
std::string worklist_lines(const JobRun& run);

struct GoldStandardCase {
  std::string case_id;
  std::string patient_id;
  Timestamp start{};
  Timestamp end{};
  std::string prompt;
  std::string expert_response;

  bool operator==(const GoldStandardCase&) const = default;
};

std::vector<GoldStandardCase> parse_gold(std::string_view jsonl);  // Error(kInvalidParams)
std::string gold_to_jsonl(const std::vector<GoldStandardCase>& cases);

// Lowercase, collapsed whitespace, trailing punctuation removed.
std::string normalize_for_compare(std::string_view s);
bool outputs_match(Comparator comparator, std::string_view output, std::string_view expert);

struct CaseResult {
  std::string case_id;
  std::string patient_id;
  std::string output;
  std::string expected;
  bool match = false;
  std::optional<std::string> error;
};

struct GoldEvaluation {
  std::string automation_id;
  std::size_t cases = 0;
  std::size_t matches = 0;
  std::size_t errors = 0;
  double agreement_rate = 0.0;
  std::vector<CaseResult> results;  // dataset order
};

// The case prompt replaces the spec template; the spec supplies kinds,
// system prompt, model and comparator. Throws Error(kEmptyDataset).
GoldEvaluation evaluate_against_gold(const AutomationSpec& spec, const std::vector<GoldStandardCase>& dataset,
                                     gateway::Gateway& gateway, const timeline::TimelineStore& store,
                                     std::size_t parallelism = 4);

enum class Verdict { kAgree, kDisagree };
std::string_view to_string(Verdict v);

struct FeedbackRecord {
  std::string automation_id;
  std::string patient_id;
  Verdict verdict = Verdict::kAgree;
  std::optional<std::string> note;
  Timestamp recorded_at{};

  bool operator==(const FeedbackRecord&) const = default;
};

struct FeedbackSummary {
  std::size_t agree = 0;
  std::size_t disagree = 0;
  double positive_rate() const {
    auto n = agree + disagree;
    return n ? static_cast<double>(agree) / static_cast<double>(n) : 0.0;
  }
};

// Append-only; optionally mirrored to a JSONL file.
class FeedbackStore {
 public:
  explicit FeedbackStore(const AutomationRegistry& registry, std::optional<std::filesystem::path> file = std::nullopt);
  // Throws Error(kUnknownAutomation).
  void record(const FeedbackRecord& rec);
  std::vector<FeedbackRecord> records(const std::string& automation_id) const;
  FeedbackSummary summary(const std::string& automation_id) const;
  // Reads an existing mirror file into memory.
  std::size_t load();

 private:
  const AutomationRegistry& registry_;
  std::optional<std::filesystem::path> file_;
  mutable std::mutex mu_;
  std::vector<FeedbackRecord> records_;
};

std::string feedback_to_json_line(const FeedbackRecord& rec);
FeedbackRecord parse_feedback_line(std::string_view line);

// Agree keeps the model output as the expert response; disagree needs the
// correction in the note (Error(kInvalidParams) otherwise).
GoldStandardCase append_to_gold(const AutomationSpec& spec, const FeedbackRecord& rec, const std::string& output,
                                std::vector<GoldStandardCase>& dataset);

struct IntegrityReport {
  std::string automation_id;
  std::size_t total_executions = 0;
  std::size_t patients = 0;
  std::size_t errors = 0;
  std::int64_t tokens_sent = 0;
  double mean_tokens_per_patient = 0.0;
  double mean_latency_s = 0.0;  // per job
  std::map<std::string, std::size_t> error_codes;
};

// Throws Error(kNoHistory) when no job belongs to the automation.
IntegrityReport integrity_report(const std::string& automation_id, const std::vector<JobRun>& history);
std::string render_integrity(const IntegrityReport& r, const std::optional<FeedbackSummary>& feedback = std::nullopt);
std::string integrity_to_json(const IntegrityReport& r, const std::optional<FeedbackSummary>& feedback = std::nullopt);

// Context text a gold case sees, as stored in a snapshot.
std::string case_context(const AutomationSpec& spec, const GoldStandardCase& c, const timeline::TimelineStore& store);
std::filesystem::path snapshot_path(const std::filesystem::path& dir, const AutomationSpec& spec,
                                    const GoldStandardCase& c);
void take_snapshots(const AutomationSpec& spec, const std::vector<GoldStandardCase>& subset,
                    const timeline::TimelineStore& store, const std::filesystem::path& dir);
// Patient ids (sorted, unique) whose context no longer matches the snapshot.
// Throws Error(kMissingSnapshot).
std::vector<std::string> drift_check(const AutomationSpec& spec, const std::vector<GoldStandardCase>& subset,
                                     const timeline::TimelineStore& store, const std::filesystem::path& dir);

}  // namespace clinctx::automation
