#include "clinctx/timeline.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <fstream>
#include <mutex>
#include <nlohmann/json.hpp>
#include <sstream>

#include "clinctx/error.hpp"
#include "clinctx/text.hpp"

namespace clinctx::timeline {
namespace {

using nlohmann::json;

constexpr std::array<std::string_view, 8> kKindNames = {
    "note",      "medication_order", "lab_result",   "diagnostic_report",
    "procedure", "order",            "external_hie", "referral_document",
};

const json* find_path(const json& node, std::initializer_list<std::string_view> path) {
  const json* cur = &node;
  for (std::string_view key : path) {
    if (key.size() == 1 && key[0] == '0') {
      if (!cur->is_array() || cur->empty()) return nullptr;
      cur = &(*cur)[0];
      continue;
    }
    if (!cur->is_object()) return nullptr;
    auto it = cur->find(std::string(key));
    if (it == cur->end()) return nullptr;
    cur = &*it;
  }
  return cur;
}

std::optional<std::string> string_at(const json& node, std::initializer_list<std::string_view> path) {
  const json* v = find_path(node, path);
  if (v == nullptr) return std::nullopt;
  if (v->is_string()) {
    std::string s = v->get<std::string>();
    if (s.empty()) return std::nullopt;
    return s;
  }
  if (v->is_number() || v->is_boolean()) return v->dump();
  return std::nullopt;
}

// CodeableConcept -> display text.
std::optional<std::string> concept_text(const json& node, std::string_view field) {
  if (auto t = string_at(node, {field, "text"})) return t;
  if (auto t = string_at(node, {field, "coding", "0", "display"})) return t;
  return string_at(node, {field, "coding", "0", "code"});
}

std::optional<std::string> first_string(const json& node,
                                        std::initializer_list<std::initializer_list<std::string_view>> paths) {
  for (auto path : paths) {
    if (auto s = string_at(node, path)) return s;
  }
  return std::nullopt;
}

// Attachment.data is base64 per the interchange format.
std::optional<std::string> attachment_text(const json& attachment) {
  if (auto data = string_at(attachment, {"data"})) return text::base64_decode(*data);
  return std::nullopt;
}

std::string subject_patient(const json& resource) {
  auto ref = string_at(resource, {"subject", "reference"});
  if (!ref) ref = string_at(resource, {"patient", "reference"});
  if (!ref) return {};
  std::string_view r = *ref;
  if (r.starts_with("Patient/")) r.remove_prefix(8);
  return std::string(r);
}

std::string sanitize_header_field(std::string_view field) {
  std::string out;
  out.reserve(field.size());
  for (char c : field) {
    if (c == '\n' || c == '\r') {
      out += ' ';
    } else if (c == '|') {
      out += '/';
    } else if (c == ']') {
      out += ')';
    } else {
      out += c;
    }
  }
  return out;
}

struct Mapped {
  std::optional<ResourceEntry> entry;
  std::string warning;
};

Mapped map_resource(const std::string& type, const json& res, std::size_t index) {
  ResourceEntry e;
  std::optional<std::string> when;
  auto id = string_at(res, {"id"});
  e.entry_id = type + "/" + (id ? *id : fmt::format("#{}", index));

  if (type == "DocumentReference") {
    e.kind = ResourceKind::kNote;
    when = first_string(res, {{"date"}, {"context", "period", "start"}});
    e.title = first_string(res, {{"description"}});
    if (!e.title) e.title = concept_text(res, "type");
    e.author_role = first_string(res, {{"author", "0", "display"}});
    if (const json* contents = find_path(res, {"content"}); contents && contents->is_array()) {
      for (const json& c : *contents) {
        const json* att = find_path(c, {"attachment"});
        if (att == nullptr) continue;
        auto decoded = attachment_text(*att);
        if (!decoded) return {std::nullopt, e.entry_id + ": attachment is not valid base64"};
        if (!e.body.empty()) e.body += '\n';
        e.body += *decoded;
      }
    }
  } else if (type == "MedicationRequest") {
    e.kind = ResourceKind::kMedicationOrder;
    when = string_at(res, {"authoredOn"});
    e.title = concept_text(res, "medicationCodeableConcept");
    if (!e.title) e.title = first_string(res, {{"medicationReference", "display"}});
    e.author_role = first_string(res, {{"requester", "display"}});
    if (auto dose = first_string(res, {{"dosageInstruction", "0", "text"}})) e.body = *dose;
    if (e.title) e.structured["medication"] = *e.title;
    if (auto s = string_at(res, {"status"})) e.structured["status"] = *s;
    if (auto s = string_at(res, {"intent"})) e.structured["intent"] = *s;
  } else if (type == "Observation") {
    e.kind = ResourceKind::kLabResult;
    when = first_string(res, {{"effectiveDateTime"}, {"effectivePeriod", "start"}, {"issued"}});
    e.title = concept_text(res, "code");
    if (e.title) e.structured["test"] = *e.title;
    if (auto v = string_at(res, {"valueQuantity", "value"})) e.structured["value"] = *v;
    if (auto u = first_string(res, {{"valueQuantity", "unit"}, {"valueQuantity", "code"}})) {
      e.structured["unit"] = *u;
    }
    if (auto v = string_at(res, {"valueString"})) e.structured["value"] = *v;
    if (auto v = concept_text(res, "valueCodeableConcept")) e.structured["value"] = *v;
    if (auto flag = first_string(res, {{"interpretation", "0", "text"},
                                       {"interpretation", "0", "coding", "0", "code"}})) {
      e.structured["interpretation"] = *flag;
    }
    if (auto n = first_string(res, {{"note", "0", "text"}})) e.body = *n;
  } else if (type == "DiagnosticReport") {
    e.kind = ResourceKind::kDiagnosticReport;
    when = first_string(res, {{"effectiveDateTime"}, {"effectivePeriod", "start"}, {"issued"}});
    e.title = concept_text(res, "code");
    e.author_role = first_string(res, {{"performer", "0", "display"}});
    if (auto c = string_at(res, {"conclusion"})) e.body = *c;
    if (const json* forms = find_path(res, {"presentedForm"}); forms && forms->is_array()) {
      for (const json& f : *forms) {
        auto decoded = attachment_text(f);
        if (!decoded) continue;
        if (!e.body.empty()) e.body += '\n';
        e.body += *decoded;
      }
    }
  } else if (type == "Procedure") {
    e.kind = ResourceKind::kProcedure;
    when = first_string(res, {{"performedDateTime"}, {"performedPeriod", "start"}});
    e.title = concept_text(res, "code");
    e.author_role = first_string(res, {{"performer", "0", "function", "text"},
                                       {"performer", "0", "actor", "display"}});
    if (e.title) e.structured["procedure"] = *e.title;
    if (auto s = string_at(res, {"status"})) e.structured["status"] = *s;
    if (auto n = first_string(res, {{"note", "0", "text"}})) e.body = *n;
  } else if (type == "ServiceRequest") {
    e.kind = ResourceKind::kOrder;
    when = first_string(res, {{"authoredOn"}, {"occurrenceDateTime"}});
    e.title = concept_text(res, "code");
    e.author_role = first_string(res, {{"requester", "display"}});
    if (e.title) e.structured["order"] = *e.title;
    if (auto s = string_at(res, {"status"})) e.structured["status"] = *s;
    if (auto s = string_at(res, {"intent"})) e.structured["intent"] = *s;
    if (auto n = first_string(res, {{"note", "0", "text"}})) e.body = *n;
  } else {
    return {};
  }

  if (!when) return {std::nullopt, e.entry_id + ": missing timestamp"};
  auto ts = try_parse_timestamp(*when);
  if (!ts) return {std::nullopt, e.entry_id + ": unparseable timestamp '" + *when + "'"};
  e.occurred_at = *ts;
  if (e.body.empty() && e.structured.empty()) {
    return {std::nullopt, e.entry_id + ": no body or structured content"};
  }
  if (!text::is_valid_utf8(e.body)) return {std::nullopt, e.entry_id + ": body is not UTF-8"};
  return {std::move(e), {}};
}

bool entry_less(const ResourceEntry& a, const ResourceEntry& b) {
  if (a.occurred_at != b.occurred_at) return a.occurred_at < b.occurred_at;
  return a.entry_id < b.entry_id;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::string_view to_string(ResourceKind kind) { return kKindNames[static_cast<std::size_t>(kind)]; }

std::optional<ResourceKind> kind_from_string(std::string_view name) {
  for (std::size_t i = 0; i < kKindNames.size(); ++i) {
    if (kKindNames[i] == name) return static_cast<ResourceKind>(i);
  }
  return std::nullopt;
}

std::string_view to_string(Source source) {
  return source == Source::kInternal ? "internal" : "external";
}

PatientTimeline::PatientTimeline(std::string patient_id, std::vector<ResourceEntry> entries)
    : patient_id_(std::move(patient_id)), entries_(std::move(entries)) {
  std::sort(entries_.begin(), entries_.end(), entry_less);
  std::set<std::string_view> seen;
  for (const auto& e : entries_) {
    if (!seen.insert(e.entry_id).second) {
      throw Error(ErrorCode::kDuplicateEntry, "entry_id '" + e.entry_id + "' appears twice");
    }
    if (e.body.empty() && e.structured.empty()) {
      throw Error(ErrorCode::kInvalidParams, "entry '" + e.entry_id + "' has no content");
    }
  }
}

PatientTimeline PatientTimeline::with_entries(std::vector<ResourceEntry> extra) const {
  extra.insert(extra.end(), entries_.begin(), entries_.end());
  return PatientTimeline(patient_id_, std::move(extra));
}

void ContextSelection::validate() const {
  if (kinds.empty()) throw Error(ErrorCode::kInvalidSelection, "no data kinds selected");
  if (start > end) throw Error(ErrorCode::kInvalidSelection, "range start is after range end");
}

bool ContextSelection::matches(const ResourceEntry& entry) const {
  return kinds.contains(entry.kind) && start <= entry.occurred_at && entry.occurred_at <= end;
}

ContextSelection ContextSelection::everything(std::string patient_id) {
  ContextSelection sel;
  sel.patient_id = std::move(patient_id);
  sel.kinds.insert(kAllKinds.begin(), kAllKinds.end());
  sel.start = earliest_timestamp();
  sel.end = latest_timestamp();
  return sel;
}

Timestamp earliest_timestamp() { return parse_timestamp("0001-01-01"); }
Timestamp latest_timestamp() { return parse_timestamp("9999-12-31T23:59:59.999Z"); }

ParseResult parse_bundle(std::string_view raw) {
  json doc;
  try {
    doc = json::parse(raw.begin(), raw.end());
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kMalformedDocument, e.what());
  }
  if (!doc.is_object() || doc.value("resourceType", std::string{}) != "Bundle") {
    throw Error(ErrorCode::kMalformedDocument, "document is not a Bundle");
  }

  ParseResult result;
  std::vector<ResourceEntry> entries;
  std::string patient_id;
  std::string subject_id;
  bool any_resource = false;

  auto note_subject = [&](const std::string& id) {
    if (id.empty()) return;
    if (!subject_id.empty() && subject_id != id) {
      throw Error(ErrorCode::kMalformedDocument,
                  "bundle mixes subjects '" + subject_id + "' and '" + id + "'");
    }
    subject_id = id;
  };

  const json* list = find_path(doc, {"entry"});
  if (list != nullptr && !list->is_array()) {
    throw Error(ErrorCode::kMalformedDocument, "Bundle.entry is not an array");
  }
  if (list != nullptr) {
    for (std::size_t i = 0; i < list->size(); ++i) {
      const json* res = find_path((*list)[i], {"resource"});
      if (res == nullptr || !res->is_object()) {
        result.warnings.push_back(fmt::format("entry #{}: no resource object", i));
        continue;
      }
      any_resource = true;
      std::string type = res->value("resourceType", std::string{});
      if (type == "Patient") {
        if (auto id = string_at(*res, {"id"})) note_subject(*id);
        patient_id = subject_id;
        continue;
      }
      note_subject(subject_patient(*res));
      Mapped m = map_resource(type, *res, i);
      if (m.entry) {
        entries.push_back(std::move(*m.entry));
      } else if (!m.warning.empty()) {
        result.warnings.push_back(std::move(m.warning));
      } else {
        ++result.skipped;
      }
    }
  }
  if (patient_id.empty()) patient_id = subject_id;
  if (any_resource && patient_id.empty()) {
    throw Error(ErrorCode::kMissingPatientId, "no Patient resource or subject reference");
  }
  std::sort(entries.begin(), entries.end(), entry_less);
  for (std::size_t i = 1; i < entries.size(); ++i) {
    if (entries[i].entry_id == entries[i - 1].entry_id) {
      throw Error(ErrorCode::kMalformedDocument, "duplicate resource id " + entries[i].entry_id);
    }
  }
  result.timeline = PatientTimeline(std::move(patient_id), std::move(entries));
  return result;
}

ResourceEntry ingest_native(std::string_view doc, ResourceKind kind, Timestamp occurred_at,
                            std::string entry_id, std::optional<std::string> title) {
  if (kind != ResourceKind::kReferralDocument && kind != ResourceKind::kExternalHie) {
    throw Error(ErrorCode::kInvalidParams,
                fmt::format("native ingestion does not accept kind '{}'", to_string(kind)));
  }
  if (doc.empty()) throw Error(ErrorCode::kUndecodableDocument, "document is empty");
  if (!text::is_valid_utf8(doc)) {
    throw Error(ErrorCode::kUndecodableDocument, "document is not UTF-8 text");
  }
  ResourceEntry e;
  e.kind = kind;
  e.occurred_at = occurred_at;
  e.body = std::string(doc);
  e.title = std::move(title);
  e.source = kind == ResourceKind::kExternalHie ? Source::kExternal : Source::kInternal;
  e.entry_id = entry_id.empty()
                   ? fmt::format("{}/{}", to_string(kind), text::sha256_hex(doc).substr(0, 16))
                   : std::move(entry_id);
  return e;
}

PatientTimeline filter(const PatientTimeline& timeline, const ContextSelection& selection) {
  selection.validate();
  if (selection.patient_id != timeline.patient_id()) {
    throw Error(ErrorCode::kPatientMismatch, "selection is for '" + selection.patient_id +
                                                 "', timeline is for '" + timeline.patient_id() +
                                                 "'");
  }
  std::vector<ResourceEntry> kept;
  for (const auto& e : timeline.entries()) {
    if (selection.matches(e)) kept.push_back(e);
  }
  return PatientTimeline(timeline.patient_id(), std::move(kept));
}

std::string serialize_for_context(const PatientTimeline& timeline) {
  std::string out;
  bool first = true;
  for (const auto& e : timeline.entries()) {
    if (!first) out += '\n';
    first = false;
    out += fmt::format("[{} | {} | {} | {} | {}]\n", to_string(e.kind),
                       format_timestamp(e.occurred_at),
                       e.title ? sanitize_header_field(*e.title) : "-",
                       e.author_role ? sanitize_header_field(*e.author_role) : "-",
                       to_string(e.source));
    if (!e.body.empty()) {
      out += e.body;
      if (e.body.back() != '\n') out += '\n';
    }
    for (const auto& [key, value] : e.structured) {
      out += key;
      out += ": ";
      out += sanitize_header_field(value);
      out += '\n';
    }
  }
  return out;
}

void TimelineStore::put(PatientTimeline timeline) {
  std::unique_lock lock(mu_);
  std::string id = timeline.patient_id();
  timelines_.insert_or_assign(std::move(id), std::move(timeline));
}

std::optional<PatientTimeline> TimelineStore::get(const std::string& patient_id) const {
  std::shared_lock lock(mu_);
  auto it = timelines_.find(patient_id);
  if (it == timelines_.end()) return std::nullopt;
  return it->second;
}

bool TimelineStore::contains(const std::string& patient_id) const {
  std::shared_lock lock(mu_);
  return timelines_.contains(patient_id);
}

std::vector<std::string> TimelineStore::patient_ids() const {
  std::shared_lock lock(mu_);
  std::vector<std::string> ids;
  ids.reserve(timelines_.size());
  for (const auto& [id, _] : timelines_) ids.push_back(id);
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::size_t TimelineStore::size() const {
  std::shared_lock lock(mu_);
  return timelines_.size();
}

std::size_t TimelineStore::load_directory(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw Error(ErrorCode::kIoError, dir.string() + " is not a directory");
  std::vector<fs::path> bundles;
  for (const auto& item : fs::directory_iterator(dir)) {
    if (item.is_regular_file() && item.path().extension() == ".json") bundles.push_back(item.path());
  }
  std::sort(bundles.begin(), bundles.end());
  for (const auto& path : bundles) {
    ParseResult parsed = parse_bundle(read_file(path));
    PatientTimeline tl = std::move(parsed.timeline);
    fs::path sidecar = path;
    sidecar.replace_extension(".native.jsonl");
    if (fs::exists(sidecar)) {
      std::vector<ResourceEntry> native;
      for (const auto& line : text::split_lines(read_file(sidecar))) {
        if (text::trim(line).empty()) continue;
        json rec;
        try {
          rec = json::parse(line);
        } catch (const json::parse_error& e) {
          throw Error(ErrorCode::kMalformedDocument, sidecar.string() + ": " + e.what());
        }
        auto kind = kind_from_string(rec.value("kind", std::string{}));
        if (!kind) throw Error(ErrorCode::kMalformedDocument, sidecar.string() + ": bad kind");
        std::optional<std::string> title;
        if (rec.contains("title")) title = rec["title"].get<std::string>();
        std::string rel = rec.value("path", std::string{});
        native.push_back(ingest_native(read_file(dir / rel), *kind,
                                       parse_timestamp(rec.value("occurred_at", std::string{})),
                                       fmt::format("{}/{}", to_string(*kind), rel),
                                       std::move(title)));
      }
      tl = tl.with_entries(std::move(native));
    }
    put(std::move(tl));
  }
  return bundles.size();
}

}  // namespace clinctx::timeline
