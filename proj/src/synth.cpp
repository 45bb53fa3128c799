#include "clinctx/synth.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <fstream>
#include <nlohmann/json.hpp>
#include <random>

#include "clinctx/error.hpp"
#include "clinctx/text.hpp"

namespace clinctx::synth {
namespace {

using ojson = nlohmann::ordered_json;
using timeline::ResourceKind;

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(gen_() % n); }
  int between(int lo, int hi) { return lo + static_cast<int>(below(static_cast<std::size_t>(hi - lo + 1))); }
  double unit() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
  bool chance(double p) { return unit() < p; }
  template <typename T, std::size_t N>
  const T& pick(const std::array<T, N>& a) { return a[below(N)]; }

 private:
  std::mt19937_64 gen_;
};

constexpr std::array<std::string_view, 10> kProblems = {
    "community-acquired pneumonia", "congestive heart failure exacerbation", "type 2 diabetes with hyperglycemia",
    "acute kidney injury",          "cellulitis of the left leg",            "atrial fibrillation with rapid ventricular response",
    "chronic obstructive pulmonary disease exacerbation", "urinary tract infection",
    "postoperative ileus",          "metastatic colon cancer"};

constexpr std::array<std::string_view, 8> kSymptoms = {
    "shortness of breath", "fatigue", "intermittent chest pain", "lower extremity swelling",
    "poor appetite",       "productive cough", "mild confusion", "abdominal discomfort"};

struct Drug {
  std::string_view name;
  std::string_view dose;
};
constexpr std::array<Drug, 10> kDrugs = {{{"furosemide", "40 mg oral daily"},
                                           {"metformin", "500 mg oral twice daily"},
                                           {"apixaban", "5 mg oral twice daily"},
                                           {"ceftriaxone", "1 g intravenous daily"},
                                           {"metoprolol tartrate", "25 mg oral twice daily"},
                                           {"insulin glargine", "18 units subcutaneous nightly"},
                                           {"lisinopril", "10 mg oral daily"},
                                           {"piperacillin-tazobactam", "4.5 g intravenous every 8 hours"},
                                           {"atorvastatin", "40 mg oral nightly"},
                                           {"ondansetron", "4 mg intravenous every 6 hours as needed"}}};

struct Lab {
  std::string_view name;
  std::string_view unit;
  double lo, hi, ref_lo, ref_hi;
};
constexpr std::array<Lab, 8> kLabs = {{{"Sodium", "mmol/L", 126, 148, 135, 145},
                                        {"Potassium", "mmol/L", 2.9, 5.9, 3.5, 5.0},
                                        {"Creatinine", "mg/dL", 0.6, 3.4, 0.6, 1.2},
                                        {"Hemoglobin", "g/dL", 7.1, 15.8, 12.0, 16.0},
                                        {"White blood cell count", "10*3/uL", 3.1, 19.5, 4.0, 11.0},
                                        {"Glucose", "mg/dL", 68, 342, 70, 140},
                                        {"Troponin I", "ng/mL", 0.0, 0.9, 0.0, 0.04},
                                        {"Lactate", "mmol/L", 0.6, 4.8, 0.5, 2.0}}};

constexpr std::array<std::string_view, 6> kImaging = {
    "Chest radiograph", "CT abdomen and pelvis with contrast", "Transthoracic echocardiogram",
    "Renal ultrasound",  "CT head without contrast",            "Lower extremity venous duplex"};

constexpr std::array<std::string_view, 6> kFindings = {
    "No acute cardiopulmonary process.",
    "Small bilateral pleural effusions with mild pulmonary edema.",
    "Left ventricular ejection fraction estimated at 35 percent.",
    "No hydronephrosis. Kidneys are normal in size.",
    "No acute intracranial abnormality.",
    "No deep venous thrombosis in the imaged veins."};

constexpr std::array<std::string_view, 6> kProcedures = {
    "Peripherally inserted central catheter placement", "Thoracentesis", "Colonoscopy",
    "Incision and drainage of abscess",                 "Laparoscopic cholecystectomy", "Paracentesis"};

constexpr std::array<std::string_view, 6> kOrders = {
    "Physical therapy evaluation", "Cardiology consult", "Social work consult",
    "Hospice evaluation",          "Nutrition consult",  "Case management referral"};

constexpr std::array<std::string_view, 5> kAuthors = {"Attending physician", "Hospitalist", "Nurse practitioner",
                                                      "Resident physician", "Consulting physician"};

constexpr std::array<std::string_view, 6> kDepartments = {"Hospital Medicine", "Emergency Medicine", "Cardiology",
                                                          "Oncology",          "Surgery",            "Case Management"};

constexpr std::array<std::string_view, 8> kQueries = {
    "Summarize this patient's hospital course.",
    "What antibiotics has the patient received?",
    "List the abnormal lab results from the last week.",
    "Does the patient meet criteria for hospice referral?",
    "Write a discharge summary for this patient.",
    "What is the most recent creatinine?",
    "Classify the heart failure severity.",
    "Translate the discharge instructions into Spanish."};

std::string fixed1(double v) { return fmt::format("{:.1f}", v); }

Timestamp at_offset(Timestamp start, int span_days, Rng& rng) {
  auto minutes = static_cast<std::int64_t>(rng.below(static_cast<std::size_t>(span_days) * 24 * 60));
  return start + std::chrono::minutes(minutes);
}

ojson subject(const std::string& id) { return ojson{{"reference", "Patient/" + id}}; }
ojson concept_of(std::string_view text) { return ojson{{"text", std::string(text)}}; }

std::string note_text(Rng& rng, std::string_view problem, const std::string& pid, bool first) {
  const auto& drug = rng.pick(kDrugs);
  std::string s;
  if (first) s += fmt::format("Patient identifier: {}. ", pid);
  s += fmt::format("Patient is admitted with {}. ", problem);
  s += fmt::format("Patient reports {} for {} days. ", rng.pick(kSymptoms), rng.between(1, 14));
  s += fmt::format("Blood pressure {}/{} and heart rate {}. ", rng.between(92, 168), rng.between(54, 98),
                   rng.between(58, 124));
  s += fmt::format("Started {} {}. ", drug.name, drug.dose);
  s += fmt::format("Plan is to continue monitoring and reassess in {} hours.", rng.between(12, 48));
  return s;
}

}  // namespace

std::vector<SyntheticPatient> generate_patients(const PatientOptions& options) {
  if (options.min_resources < 1 || options.max_resources < options.min_resources || options.span_days < 1) {
    throw Error(ErrorCode::kInvalidParams, "invalid synthetic patient options");
  }
  std::vector<SyntheticPatient> out;
  for (std::size_t i = 0; i < options.patients; ++i) {
    Rng rng(options.seed * 1'000'003ULL + i + 1);
    SyntheticPatient p;
    p.patient_id = fmt::format("p{:04d}", i + 1);
    const auto& pid = p.patient_id;
    auto problem = rng.pick(kProblems);

    ojson entries = ojson::array();
    entries.push_back(ojson{{"resource", ojson{{"resourceType", "Patient"}, {"id", pid}}}});
    int n = rng.between(options.min_resources, options.max_resources);
    for (int r = 0; r < n; ++r) {
      auto when = format_timestamp(at_offset(options.start, options.span_days, rng));
      std::string rid = fmt::format("{}-{}", pid, r + 1);
      ojson res;
      // The first resource is always a note so every record names its patient.
      auto slot = r == 0 ? 0 : rng.below(10);
      if (slot <= 2) {
        std::string body = note_text(rng, problem, pid, r == 0);
        res = {{"resourceType", "DocumentReference"},
               {"id", rid},
               {"subject", subject(pid)},
               {"date", when},
               {"description", r == 0 ? "Admission history and physical" : "Progress note"},
               {"author", ojson::array({ojson{{"display", std::string(rng.pick(kAuthors))}}})},
               {"content", ojson::array({ojson{{"attachment", ojson{{"contentType", "text/plain"},
                                                                    {"data", text::base64_encode(body)}}}}})}};
      } else if (slot == 3) {
        const auto& drug = rng.pick(kDrugs);
        res = {{"resourceType", "MedicationRequest"},
               {"id", rid},
               {"subject", subject(pid)},
               {"authoredOn", when},
               {"status", rng.chance(0.8) ? "active" : "completed"},
               {"intent", "order"},
               {"medicationCodeableConcept", concept_of(drug.name)},
               {"requester", ojson{{"display", std::string(rng.pick(kAuthors))}}},
               {"dosageInstruction", ojson::array({ojson{{"text", std::string(drug.dose)}}})}};
      } else if (slot <= 5) {
        const auto& lab = rng.pick(kLabs);
        double v = lab.lo + (lab.hi - lab.lo) * rng.unit();
        std::string flag = v < lab.ref_lo ? "low" : v > lab.ref_hi ? "high" : "normal";
        res = {{"resourceType", "Observation"},
               {"id", rid},
               {"subject", subject(pid)},
               {"status", "final"},
               {"effectiveDateTime", when},
               {"code", concept_of(lab.name)},
               {"valueQuantity", ojson{{"value", fixed1(v)}, {"unit", std::string(lab.unit)}}},
               {"interpretation", ojson::array({ojson{{"text", flag}}})}};
      } else if (slot == 6) {
        res = {{"resourceType", "DiagnosticReport"},
               {"id", rid},
               {"subject", subject(pid)},
               {"status", "final"},
               {"effectiveDateTime", when},
               {"code", concept_of(rng.pick(kImaging))},
               {"performer", ojson::array({ojson{{"display", "Radiologist"}}})},
               {"conclusion", std::string(rng.pick(kFindings))}};
      } else if (slot == 7) {
        auto proc = rng.pick(kProcedures);
        res = {{"resourceType", "Procedure"},
               {"id", rid},
               {"subject", subject(pid)},
               {"status", "completed"},
               {"performedDateTime", when},
               {"code", concept_of(proc)},
               {"note", ojson::array({ojson{{"text", fmt::format("{} completed without complications.", proc)}}})}};
      } else {
        res = {{"resourceType", "ServiceRequest"},
               {"id", rid},
               {"subject", subject(pid)},
               {"status", "active"},
               {"intent", "order"},
               {"authoredOn", when},
               {"code", concept_of(rng.pick(kOrders))},
               {"requester", ojson{{"display", std::string(rng.pick(kAuthors))}}}};
      }
      entries.push_back(ojson{{"fullUrl", "urn:uuid:" + rid}, {"resource", std::move(res)}});
    }
    ojson bundle{{"resourceType", "Bundle"}, {"type", "collection"}, {"entry", std::move(entries)}};
    p.bundle_json = bundle.dump(2) + "\n";

    if (rng.chance(options.native_share)) {
      NativeDoc ref;
      ref.kind = ResourceKind::kReferralDocument;
      ref.occurred_at = at_offset(options.start, options.span_days, rng);
      ref.filename = fmt::format("native/{}-referral.txt", pid);
      ref.title = "Outside referral letter";
      ref.content = fmt::format(
          "Referral to orthopedic surgery.\nReason for referral: evaluation of {} in the setting of {}.\n"
          "Imaging enclosed: {}.\nRequested timeframe: within {} weeks.\n",
          rng.chance(0.5) ? "right knee pain" : "left hip pain", problem, rng.pick(kImaging), rng.between(1, 6));
      p.native.push_back(std::move(ref));
    }
    if (rng.chance(options.native_share)) {
      NativeDoc hie;
      hie.kind = ResourceKind::kExternalHie;
      hie.occurred_at = at_offset(options.start, options.span_days, rng);
      hie.filename = fmt::format("native/{}-hie.txt", pid);
      hie.title = "Outside hospital discharge summary";
      const auto& drug = rng.pick(kDrugs);
      hie.content = fmt::format(
          "Outside hospital discharge summary.\nDiagnosis: {}.\nDischarge medication: {} {}.\n"
          "Follow up with primary care in {} days.\n",
          rng.pick(kProblems), drug.name, drug.dose, rng.between(3, 21));
      p.native.push_back(std::move(hie));
    }
    out.push_back(std::move(p));
  }
  return out;
}

std::size_t write_patients(const std::filesystem::path& dir, const std::vector<SyntheticPatient>& patients) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "native");
  auto write = [](const fs::path& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
  };
  for (const auto& p : patients) {
    write(dir / (p.patient_id + ".json"), p.bundle_json);
    fs::path sidecar = dir / (p.patient_id + ".native.jsonl");
    if (p.native.empty()) {
      fs::remove(sidecar);
      continue;
    }
    std::string lines;
    for (const auto& d : p.native) {
      write(dir / d.filename, d.content);
      lines += ojson{{"kind", std::string(timeline::to_string(d.kind))},
                     {"occurred_at", format_timestamp(d.occurred_at)},
                     {"path", d.filename},
                     {"title", d.title}}
                   .dump();
      lines += '\n';
    }
    write(sidecar, lines);
  }
  return patients.size();
}

timeline::PatientTimeline to_timeline(const SyntheticPatient& patient) {
  auto parsed = timeline::parse_bundle(patient.bundle_json);
  std::vector<timeline::ResourceEntry> native;
  for (const auto& d : patient.native) {
    native.push_back(timeline::ingest_native(d.content, d.kind, d.occurred_at,
                                             fmt::format("{}/{}", timeline::to_string(d.kind), d.filename), d.title));
  }
  return parsed.timeline.with_entries(std::move(native));
}

void load_into(timeline::TimelineStore& store, const std::vector<SyntheticPatient>& patients) {
  for (const auto& p : patients) store.put(to_timeline(p));
}

std::vector<logs::SessionLog> generate_session_logs(const LogOptions& options) {
  if (options.users == 0 || options.span_days < 1) throw Error(ErrorCode::kInvalidParams, "invalid log options");
  std::vector<std::string> patients = options.patient_ids;
  if (patients.empty()) {
    for (int i = 1; i <= 50; ++i) patients.push_back(fmt::format("p{:04d}", i));
  }
  Rng rng(options.seed ^ 0x5DEECE66DULL);
  std::vector<std::string> user_dept(options.users);
  for (auto& d : user_dept) d = std::string(rng.pick(kDepartments));

  std::vector<logs::SessionLog> out;
  out.reserve(options.sessions);
  for (std::size_t i = 0; i < options.sessions; ++i) {
    logs::SessionLog s;
    s.session_id = fmt::format("s-{:06d}", i + 1);
    auto u = rng.below(options.users);
    s.user_id = fmt::format("u{:03d}", u + 1);
    s.department = user_dept[u];
    s.patient_id = patients[rng.below(patients.size())];
    s.selection.patient_id = s.patient_id;
    if (rng.chance(0.33)) {
      s.selection.kinds.insert(timeline::kAllKinds.begin(), timeline::kAllKinds.end());
    } else {
      for (auto k : timeline::kAllKinds) {
        if (rng.chance(0.55)) s.selection.kinds.insert(k);
      }
      if (s.selection.kinds.empty()) s.selection.kinds.insert(ResourceKind::kNote);
    }
    s.created_at = at_offset(options.start, options.span_days, rng);
    s.selection.end = s.created_at;
    s.selection.start = s.created_at - std::chrono::days(rng.chance(0.5) ? 365 : 30);
    s.context_tokens = static_cast<std::int64_t>(rng.between(2'000, 400'000));
    s.context_assembly_ms = static_cast<std::int64_t>(rng.between(200, 30'000));
    s.context_text = fmt::format("[note | {} | Progress note | - | internal]\nSynthetic context for {}.\n",
                                 format_timestamp(s.created_at), s.patient_id);
    int turns = rng.chance(0.25) ? rng.between(2, 5) : 1;
    for (int t = 0; t < turns; ++t) {
      logs::TurnRecord r;
      r.turn_index = t;
      r.at = s.created_at + std::chrono::minutes(2 * t);
      r.query = std::string(rng.pick(kQueries));
      r.model = s.context_tokens > 120'000 ? "long-context" : "standard";
      r.mode = s.context_tokens > 900'000 ? "map_reduce" : "single";
      r.chunk_count = 1;
      r.latency_assembly_ms = t == 0 ? s.context_assembly_ms : 0;
      r.latency_inference_ms = static_cast<std::int64_t>(rng.between(1'500, 25'000));
      r.tokens_sent = s.context_tokens + 40 * (t + 1);
      r.tokens_received = static_cast<std::int64_t>(rng.between(50, 1'500));
      r.cost = Decimal::from_raw(r.tokens_sent * 2 + r.tokens_received * 8);
      if (rng.chance(0.02)) {
        r.error = "timeout";
      } else {
        r.response = "Synthetic response.";
        if (rng.chance(0.05)) {
          r.feedback = logs::Feedback{rng.chance(0.7) ? logs::Thumbs::kUp : logs::Thumbs::kDown, std::nullopt,
                                      r.at + std::chrono::minutes(1)};
          if (r.feedback->thumbs == logs::Thumbs::kDown && rng.chance(0.5)) r.feedback->note = "wrong lab value";
        }
      }
      s.turns.push_back(std::move(r));
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace clinctx::synth
