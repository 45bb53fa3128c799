#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "clinctx/time.hpp"

namespace clinctx::timeline {

enum class ResourceKind {
  kNote,
  kMedicationOrder,
  kLabResult,
  kDiagnosticReport,
  kProcedure,
  kOrder,
  kExternalHie,
  kReferralDocument,
};

inline constexpr std::array<ResourceKind, 8> kAllKinds = {
    ResourceKind::kNote,           ResourceKind::kMedicationOrder, ResourceKind::kLabResult,
    ResourceKind::kDiagnosticReport, ResourceKind::kProcedure,     ResourceKind::kOrder,
    ResourceKind::kExternalHie,    ResourceKind::kReferralDocument,
};

std::string_view to_string(ResourceKind kind);
std::optional<ResourceKind> kind_from_string(std::string_view name);

enum class Source { kInternal, kExternal };

std::string_view to_string(Source source);

struct ResourceEntry {
  std::string entry_id;
  ResourceKind kind = ResourceKind::kNote;
  Timestamp occurred_at{};
  std::optional<std::string> author_role;
  std::optional<std::string> title;
  std::string body;
  std::map<std::string, std::string> structured;
  Source source = Source::kInternal;

  bool operator==(const ResourceEntry&) const = default;
};

// Immutable once built. Entries are kept sorted by (occurred_at, entry_id).
class PatientTimeline {
 public:
  PatientTimeline() = default;
  // Sorts the entries. Throws Error(kDuplicateEntry) on a repeated entry_id and
  // Error(kInvalidParams) on an entry with neither body nor structured fields.
  PatientTimeline(std::string patient_id, std::vector<ResourceEntry> entries);

  const std::string& patient_id() const { return patient_id_; }
  std::span<const ResourceEntry> entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  // New timeline holding these entries plus `extra`.
  PatientTimeline with_entries(std::vector<ResourceEntry> extra) const;

  bool operator==(const PatientTimeline&) const = default;

 private:
  std::string patient_id_;
  std::vector<ResourceEntry> entries_;
};

// Inclusive on both ends of the range.
struct ContextSelection {
  std::string patient_id;
  std::set<ResourceKind> kinds;
  Timestamp start{};
  Timestamp end{};

  // Throws Error(kInvalidSelection) when kinds is empty or start > end.
  void validate() const;
  bool matches(const ResourceEntry& entry) const;

  static ContextSelection everything(std::string patient_id);

  bool operator==(const ContextSelection&) const = default;
};

// Bounds used for "all time" selections; both format as valid ISO timestamps.
Timestamp earliest_timestamp();
Timestamp latest_timestamp();

struct ParseResult {
  PatientTimeline timeline;
  // Resources whose type has no mapping (Encounter, Condition, ...).
  std::size_t skipped = 0;
  // Mapped resources rejected for missing data, one message each.
  std::vector<std::string> warnings;
};

// Reads a FHIR-subset Bundle. Mapping: DocumentReference -> note,
// MedicationRequest -> medication_order, Observation -> lab_result,
// DiagnosticReport -> diagnostic_report, Procedure -> procedure,
// ServiceRequest -> order. Patient resources supply the patient id.
ParseResult parse_bundle(std::string_view raw);

// Wraps a non-FHIR document (referral letter, external HIE extract) as an
// entry. The body is the decoded text, unchanged. Only referral_document and
// external_hie are accepted. An empty entry_id derives one from the content.
ResourceEntry ingest_native(std::string_view doc, ResourceKind kind, Timestamp occurred_at,
                            std::string entry_id = {}, std::optional<std::string> title = {});

PatientTimeline filter(const PatientTimeline& timeline, const ContextSelection& selection);

// Renders the timeline as model context. Grammar is documented in
// docs/context-format.md; output is a pure function of the timeline.
std::string serialize_for_context(const PatientTimeline& timeline);

// Thread-safe map of patient id -> timeline.
class TimelineStore {
 public:
  void put(PatientTimeline timeline);
  std::optional<PatientTimeline> get(const std::string& patient_id) const;
  bool contains(const std::string& patient_id) const;
  std::vector<std::string> patient_ids() const;
  std::size_t size() const;

  // Loads every `*.json` bundle in `dir`. A bundle may have a sidecar
  // `<stem>.native.jsonl` listing native documents as
  // {"kind", "occurred_at", "path", "title"?} with paths relative to `dir`.
  // Returns the number of timelines loaded.
  std::size_t load_directory(const std::filesystem::path& dir);

 private:
  mutable std::shared_mutex mu_;
  std::unordered_map<std::string, PatientTimeline> timelines_;
};

}  // namespace clinctx::timeline
