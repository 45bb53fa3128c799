#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "clinctx/session_log.hpp"
#include "clinctx/time.hpp"
#include "clinctx/timeline.hpp"

// Seeded fake patients and usage logs so every flow runs without clinical data.
namespace clinctx::synth {

struct PatientOptions {
  std::size_t patients = 20;
  std::uint64_t seed = 0;
  Timestamp start = parse_timestamp("2024-01-01T00:00:00Z");
  int span_days = 540;
  int min_resources = 8;
  int max_resources = 30;
  // Chance that a patient also has native referral / HIE documents.
  double native_share = 0.5;
};

struct NativeDoc {
  timeline::ResourceKind kind = timeline::ResourceKind::kReferralDocument;
  Timestamp occurred_at{};
  std::string filename;  // relative to the patient directory
  std::string title;
  std::string content;
};

struct SyntheticPatient {
  std::string patient_id;  // "p0001", ...
  std::string bundle_json;
  std::vector<NativeDoc> native;
};

std::vector<SyntheticPatient> generate_patients(const PatientOptions& options);
// Writes <id>.json, <id>.native.jsonl and native/<files>; returns patients written.
std::size_t write_patients(const std::filesystem::path& dir, const std::vector<SyntheticPatient>& patients);
// The same timeline load_directory would produce for the written files.
timeline::PatientTimeline to_timeline(const SyntheticPatient& patient);
void load_into(timeline::TimelineStore& store, const std::vector<SyntheticPatient>& patients);

struct LogOptions {
  std::size_t sessions = 100;
  std::uint64_t seed = 0;
  std::size_t users = 25;
  std::vector<std::string> patient_ids;  // empty -> p0001..p0050
  Timestamp start = parse_timestamp("2025-09-08T00:00:00Z");
  int span_days = 56;
};

// Usage logs with plausible latency, token, selection and feedback mixes.
std::vector<logs::SessionLog> generate_session_logs(const LogOptions& options);

}  // namespace clinctx::synth
