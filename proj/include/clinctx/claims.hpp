#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "clinctx/backend.hpp"
#include "clinctx/context.hpp"

namespace clinctx::claims {

inline constexpr std::size_t kChunkSize = 500;
inline constexpr std::size_t kChunkOverlap = 50;
inline constexpr std::size_t kDefaultTopK = 200;
inline constexpr int kSummarizationTask = 4;

struct ChunkIndex {
  std::vector<context::Chunk> chunks;
  // One row per chunk.
  std::vector<std::vector<double>> vectors;
};

ChunkIndex build_index(std::string_view source_text, const gateway::EmbeddingBackend& embedder);

double cosine_similarity(std::span<const double> a, std::span<const double> b);

struct SupportHit {
  std::size_t chunk = 0;   // position in ChunkIndex::chunks
  std::size_t offset = 0;  // character offset in the source
  double similarity = 0.0;
};

// Up to k chunks by descending cosine similarity; ties by ascending offset.
std::vector<SupportHit> retrieve_support(std::string_view summary_chunk, const ChunkIndex& index,
                                         const gateway::EmbeddingBackend& embedder,
                                         std::size_t k = kDefaultTopK);

// Source chunks as they appear in the entailment prompt: each one is a
// `[chunk offset=N length=M]` header line followed by its M characters,
// chunks separated by a blank line, in retrieval order.
std::string render_source_chunks(const ChunkIndex& index, std::span<const SupportHit> hits);

struct RenderedChunk {
  std::size_t offset = 0;
  std::string text;
};
std::vector<RenderedChunk> parse_source_chunks(std::string_view rendered);
// Reassembles overlapping/adjacent chunks into contiguous source segments.
std::vector<std::string> stitch_source_chunks(std::vector<RenderedChunk> chunks);

struct EntailmentVerdict {
  std::size_t summary_chunk_index = 0;
  bool all_relevant_facts_entailed = false;
  std::string explanation;
};

std::string entailment_prompt(std::string_view ai_content, std::string_view source_chunks);

// Exactly the two contract keys with the contract types, nothing else.
// Throws Error(kAdjudicationFailed) otherwise.
EntailmentVerdict parse_entailment(std::string_view response);

// One retry on a malformed reply, then Error(kAdjudicationFailed).
EntailmentVerdict adjudicate(std::size_t summary_chunk_index, std::string_view summary_chunk,
                             std::string_view rendered_support, gateway::TextBackend& backend);

struct ClaimVerdict {
  int risk_level = 1;
  std::string explanation;
  std::vector<std::string> inaccuracies;
  std::vector<std::string> hallucinations;

  std::size_t unsupported() const { return inaccuracies.size() + hallucinations.size(); }
};

// "- explanation" per line.
std::string render_non_entailed(const std::vector<std::string>& explanations);
std::string classification_prompt(std::string_view full_ai_output, std::string_view non_entailed);

// Exactly the four contract keys; risk_level an integer in 1..5.
// Throws Error(kClassificationFailed) otherwise.
ClaimVerdict parse_classification(std::string_view response);

// No explanations (or only blank ones) -> {1, [], []} without a backend call.
ClaimVerdict classify(std::string_view full_ai_output, const std::vector<std::string>& explanations,
                      gateway::TextBackend& backend);

struct GenerationInput {
  std::string generation_id;
  std::string session_id;
  std::string output;
  std::string source_text;
  int linguistic_task = 0;
};

struct GenerationScore {
  std::string generation_id;
  std::size_t summary_chunks = 0;
  std::size_t non_entailed_chunks = 0;
  std::size_t failed_adjudications = 0;
  bool classification_failed = false;
  ClaimVerdict verdict;
};

struct EvalReport {
  std::size_t sessions_total = 0;
  std::size_t sessions_sampled = 0;
  std::size_t generations_in_sample = 0;
  std::size_t summarization_generations = 0;
  std::size_t generations_analyzed = 0;
  std::size_t adjudication_failures = 0;
  std::size_t classification_failures = 0;
  std::int64_t total_hallucinations = 0;
  std::int64_t total_inaccuracies = 0;
  double mean_unsupported = 0.0;
  double mean_hallucinations = 0.0;
  double mean_inaccuracies = 0.0;
  double fraction_le_one = 0.0;
  std::map<std::size_t, std::size_t> histogram_counts;
  std::map<std::size_t, double> histogram;
  std::map<int, std::size_t> risk_levels;
  std::vector<GenerationScore> generations;
};

// Corpus statistics over scored generations; generations whose
// classification failed are counted but excluded from every mean.
EvalReport aggregate(std::vector<GenerationScore> scores);

struct ScoreOptions {
  double sample_fraction = 1.0;
  std::uint64_t seed = 0;
  std::size_t top_k = kDefaultTopK;
  std::size_t parallelism = 4;
  int summarization_task = kSummarizationTask;
};

// Seeded session sample: sessions ranked by SHA-256("<seed>:<id>"), first
// max(1, round(fraction * n)) kept. Returned in ascending id order.
std::vector<std::string> sample_sessions(std::vector<std::string> session_ids, double fraction,
                                         std::uint64_t seed);

// Samples sessions, keeps summarization generations, then per generation:
// chunk (500/50), retrieve, adjudicate each chunk, classify the non-entailed
// explanations, count claims.
EvalReport score_corpus(const std::vector<GenerationInput>& generations,
                        const gateway::EmbeddingBackend& embedder,
                        gateway::TextBackend& entailment_backend,
                        gateway::TextBackend& classification_backend,
                        const ScoreOptions& options = {});

std::string report_to_json(const EvalReport& report);
// Summary lines plus a bar rendering of the histogram (x: claims per
// generation, bar: share of generations).
std::string render_report_text(const EvalReport& report);

}  // namespace clinctx::claims
