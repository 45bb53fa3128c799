#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "clinctx/backend.hpp"

namespace clinctx::tasks {

inline constexpr std::size_t kDefaultClusters = 1000;
inline constexpr double kDefaultMergeThreshold = 0.10;
inline constexpr int kMaxKMeansIterations = 100;

// 0 = none of the tasks apply.
std::string_view linguistic_task_name(int task);

class TaskCatalog {
 public:
  TaskCatalog() = default;
  explicit TaskCatalog(std::vector<std::string> entries);

  static TaskCatalog builtin();
  static TaskCatalog parse(std::string_view text);
  static TaskCatalog from_file(const std::filesystem::path& path);

  const std::vector<std::string>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  // Exact entry, or the entry equal to `s` ignoring case and surrounding space.
  std::optional<std::string> match(std::string_view s) const;

 private:
  std::vector<std::string> entries_;
};

std::string normalization_prompt(std::string_view query);
// Throws Error(kEmptyInput) for an empty query, Error(kNormalizationFailed)
// for an empty reply or a backend failure.
std::string normalize_medical(std::string_view query, const TaskCatalog& catalog,
                              gateway::TextBackend& backend);

std::string linguistic_prompt(std::string_view query);
int parse_linguistic(std::string_view response);  // Error(kClassificationFailed)
int classify_linguistic(std::string_view query, gateway::TextBackend& backend);

struct Cluster {
  std::vector<double> centroid;
  std::string name;
  std::vector<std::string> labels;  // distinct member labels, sorted
  std::size_t weight = 0;           // member count including duplicates

  bool operator==(const Cluster&) const = default;
};

struct ClusterModel {
  std::size_t k = 0;            // requested
  std::size_t k_effective = 0;  // after capping at the distinct-label count
  std::uint64_t seed = 0;
  double merge_threshold = kDefaultMergeThreshold;
  int iterations = 0;
  std::vector<Cluster> clusters;  // post-merge

  // Post-merge cluster holding `label`, if it was clustered.
  std::optional<std::size_t> cluster_of(std::string_view label) const;
  bool operator==(const ClusterModel&) const = default;
};

double cosine_distance(const std::vector<double>& a, const std::vector<double>& b);

// Input to the merge step: a cluster as a set of weighted points.
struct MergeGroup {
  std::vector<std::size_t> members;  // indices into `points`
};

// Iteratively merges the closest centroid pair (cosine distance, ties by
// lower index pair) while that distance is <= threshold. Centroids are the
// weighted mean of the member points; merged groups keep the lower index.
std::vector<MergeGroup> merge_clusters(std::vector<MergeGroup> groups,
                                       const std::vector<std::vector<double>>& points,
                                       const std::vector<double>& weights, double threshold);

std::vector<double> weighted_mean(const std::vector<std::size_t>& members,
                                  const std::vector<std::vector<double>>& points,
                                  const std::vector<double>& weights);

// Throws Error(kEmptyInput) when `labels` is empty.
ClusterModel cluster_tasks(const std::vector<std::string>& labels, const gateway::EmbeddingBackend& embedder,
                           std::size_t k = kDefaultClusters, std::uint64_t seed = 0,
                           double merge_threshold = kDefaultMergeThreshold);

struct QueryRecord {
  std::string query_id;
  std::string text;
  std::optional<bool> thumbs_up;  // nullopt when no feedback was given
};

struct TaskLabel {
  std::string query_id;
  std::string normalized;
  std::size_t cluster_id = 0;
  std::string cluster_name;
  int linguistic_task = 0;
  std::optional<bool> thumbs_up;
};

struct LabelOptions {
  std::size_t k = kDefaultClusters;
  std::uint64_t seed = 0;
  double merge_threshold = kDefaultMergeThreshold;
  std::size_t parallelism = 4;
};

struct LabelResult {
  std::vector<TaskLabel> labels;  // input order
  ClusterModel model;
  std::size_t normalization_failures = 0;
  std::size_t classification_failures = 0;
};

// Normalize + classify each query (concurrently), then cluster the
// normalized labels. Queries whose normalization fails are left out.
LabelResult label_queries(const std::vector<QueryRecord>& queries, const TaskCatalog& catalog,
                          gateway::TextBackend& normalizer, gateway::TextBackend& linguistic,
                          const gateway::EmbeddingBackend& embedder, const LabelOptions& options = {});

struct TaskRate {
  std::string task;
  std::size_t positive = 0;
  std::size_t negative = 0;

  std::size_t n() const { return positive + negative; }
  double positive_rate() const { return n() ? static_cast<double>(positive) / static_cast<double>(n()) : 0.0; }
};

struct FeedbackReport {
  std::vector<TaskRate> by_medical;     // sorted by task name
  std::vector<TaskRate> by_linguistic;  // task names from linguistic_task_name
  std::vector<TaskRate> by_pair;        // "<medical> / <linguistic>"
};

// Tasks without any feedback are omitted.
FeedbackReport feedback_by_task(const std::vector<TaskLabel>& labels);

struct Annotation {
  std::string query_id;
  std::string annotator;
  bool appropriate = false;
};

// Lines of {"query_id", "annotator", "judgment": "appropriate"|"inappropriate"}.
std::vector<Annotation> parse_annotations(std::string_view jsonl);

struct AgreementResult {
  std::map<std::string, double> per_annotator;
  double average = 0.0;
};

// Throws Error(kUnmatchedIds) when an annotation names an unknown query and
// Error(kEmptyInput) when there are no annotations.
AgreementResult agreement_rate(const std::vector<TaskLabel>& labels, const std::vector<Annotation>& annotations);

struct TaskShare {
  std::string task;
  std::size_t count = 0;
  double share = 0.0;
};

struct TaskReport {
  std::size_t queries = 0;
  std::size_t clusters = 0;
  std::vector<TaskShare> medical;     // descending count, then name
  std::vector<TaskShare> linguistic;  // task 0..5 order
  FeedbackReport feedback;
};

TaskReport build_report(const LabelResult& result);
std::string report_to_json(const TaskReport& report);
std::string render_report_text(const TaskReport& report, std::size_t top_n = 20);

}  // namespace clinctx::tasks
