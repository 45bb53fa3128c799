#include "clinctx/claims.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <mutex>
#include <nlohmann/json.hpp>
#include <set>
#include <unordered_map>

#include "clinctx/concurrency.hpp"
#include "clinctx/error.hpp"
#include "clinctx/prompts.hpp"
#include "clinctx/text.hpp"

namespace clinctx::claims {
namespace {

using nlohmann::json;

constexpr std::string_view kChunkTag = "[chunk offset=";

// Byte position after advancing `n` code points from `from`.
std::size_t advance_chars(std::string_view s, std::size_t from, std::size_t n) {
  std::size_t i = from;
  while (n > 0 && i < s.size()) {
    ++i;
    while (i < s.size() && (static_cast<unsigned char>(s[i]) & 0xC0) == 0x80) ++i;
    --n;
  }
  return i;
}

std::optional<json> parse_object(std::string_view response) {
  std::string_view t = text::trim(response);
  // Tolerate a fenced block; anything else around the object is malformed.
  if (t.starts_with("```")) {
    auto nl = t.find('\n');
    if (nl == std::string_view::npos || !t.ends_with("```") || t.size() < nl + 4) return std::nullopt;
    t = text::trim(t.substr(nl + 1, t.size() - nl - 4));
  }
  json j = json::parse(t.begin(), t.end(), nullptr, false);
  if (j.is_discarded() || !j.is_object()) return std::nullopt;
  return j;
}

bool string_array(const json& j, std::vector<std::string>& out) {
  if (!j.is_array()) return false;
  for (const auto& v : j) {
    if (!v.is_string()) return false;
    out.push_back(v.get<std::string>());
  }
  return true;
}

}  // namespace

ChunkIndex build_index(std::string_view source_text, const gateway::EmbeddingBackend& embedder) {
  ChunkIndex idx;
  idx.chunks = context::chunk_text(source_text, kChunkSize, kChunkOverlap);
  idx.vectors.reserve(idx.chunks.size());
  for (const auto& c : idx.chunks) idx.vectors.push_back(embedder.embed(c.text));
  return idx;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(ErrorCode::kInvalidParams, "embedding dimensions differ");
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0 || nb == 0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::vector<SupportHit> retrieve_support(std::string_view summary_chunk, const ChunkIndex& index,
                                         const gateway::EmbeddingBackend& embedder, std::size_t k) {
  auto q = embedder.embed(summary_chunk);
  std::vector<SupportHit> hits;
  hits.reserve(index.chunks.size());
  for (std::size_t i = 0; i < index.chunks.size(); ++i) {
    hits.push_back({i, index.chunks[i].offset, cosine_similarity(q, index.vectors[i])});
  }
  auto better = [](const SupportHit& a, const SupportHit& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    return a.offset < b.offset;
  };
  std::size_t keep = std::min(k, hits.size());
  std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(keep), hits.end(), better);
  hits.resize(keep);
  return hits;
}

std::string render_source_chunks(const ChunkIndex& index, std::span<const SupportHit> hits) {
  std::string out;
  for (const auto& h : hits) {
    const auto& c = index.chunks.at(h.chunk);
    if (!out.empty()) out += "\n\n";
    out += fmt::format("{}{} length={}]\n", kChunkTag, c.offset, text::char_count(c.text));
    out += c.text;
  }
  return out;
}

std::vector<RenderedChunk> parse_source_chunks(std::string_view rendered) {
  std::vector<RenderedChunk> out;
  std::size_t pos = 0;
  while (pos < rendered.size()) {
    std::size_t tag = rendered.find(kChunkTag, pos);
    if (tag == std::string_view::npos) break;
    std::size_t eol = rendered.find('\n', tag);
    if (eol == std::string_view::npos) break;
    std::string_view header = rendered.substr(tag + kChunkTag.size(), eol - tag - kChunkTag.size());
    unsigned long long offset = 0, length = 0;
    char close = 0;
    std::string hdr(header);
    if (std::sscanf(hdr.c_str(), "%llu length=%llu%c", &offset, &length, &close) != 3 || close != ']') {
      pos = eol + 1;
      continue;
    }
    std::size_t body = eol + 1;
    std::size_t end = advance_chars(rendered, body, static_cast<std::size_t>(length));
    out.push_back({static_cast<std::size_t>(offset), std::string(rendered.substr(body, end - body))});
    pos = end;
  }
  return out;
}

std::vector<std::string> stitch_source_chunks(std::vector<RenderedChunk> chunks) {
  std::sort(chunks.begin(), chunks.end(), [](const RenderedChunk& a, const RenderedChunk& b) {
    if (a.offset != b.offset) return a.offset < b.offset;
    return a.text.size() > b.text.size();
  });
  std::vector<std::string> out;
  std::size_t seg_end = 0;  // in characters
  for (const auto& c : chunks) {
    std::size_t len = text::char_count(c.text);
    if (out.empty() || c.offset > seg_end) {
      out.push_back(c.text);
      seg_end = c.offset + len;
      continue;
    }
    std::size_t end = c.offset + len;
    if (end <= seg_end) continue;
    std::size_t skip = advance_chars(c.text, 0, seg_end - c.offset);
    out.back().append(c.text, skip);
    seg_end = end;
  }
  return out;
}

std::string entailment_prompt(std::string_view ai_content, std::string_view source_chunks) {
  return text::fill_template(prompts::entailment(), {{"ai_content", std::string(ai_content)},
                                                     {"source_chunks", std::string(source_chunks)}});
}

EntailmentVerdict parse_entailment(std::string_view response) {
  auto j = parse_object(response);
  auto fail = [&](std::string_view why) {
    return Error(ErrorCode::kAdjudicationFailed, std::string(why));
  };
  if (!j) throw fail("response is not a JSON object");
  if (j->size() != 2 || !j->contains("all_relevant_facts_entailed") || !j->contains("explanation")) {
    throw fail("expected exactly all_relevant_facts_entailed and explanation");
  }
  const auto& e = (*j)["all_relevant_facts_entailed"];
  const auto& x = (*j)["explanation"];
  if (!e.is_boolean() || !x.is_string()) throw fail("wrong value types");
  EntailmentVerdict v;
  v.all_relevant_facts_entailed = e.get<bool>();
  v.explanation = x.get<std::string>();
  return v;
}

EntailmentVerdict adjudicate(std::size_t summary_chunk_index, std::string_view summary_chunk,
                             std::string_view rendered_support, gateway::TextBackend& backend) {
  const std::string prompt = entailment_prompt(summary_chunk, rendered_support);
  std::string last;
  for (int attempt = 0; attempt < 2; ++attempt) {
    try {
      auto v = parse_entailment(backend.complete("", prompt).text);
      v.summary_chunk_index = summary_chunk_index;
      return v;
    } catch (const gateway::BackendError& e) {
      last = e.what();
    } catch (const Error& e) {
      last = e.what();
    }
  }
  throw Error(ErrorCode::kAdjudicationFailed,
              fmt::format("summary chunk {}: {}", summary_chunk_index, last));
}

std::string render_non_entailed(const std::vector<std::string>& explanations) {
  std::string out;
  for (const auto& e : explanations) {
    std::string_view t = text::trim(e);
    if (t.empty()) continue;
    if (!out.empty()) out += '\n';
    out += "- ";
    out += t;
  }
  return out;
}

std::string classification_prompt(std::string_view full_ai_output, std::string_view non_entailed) {
  return text::fill_template(prompts::claim_classification(),
                             {{"full_ai_output", std::string(full_ai_output)},
                              {"expl_no_entail", std::string(non_entailed)}});
}

ClaimVerdict parse_classification(std::string_view response) {
  auto fail = [](std::string_view why) {
    return Error(ErrorCode::kClassificationFailed, std::string(why));
  };
  auto j = parse_object(response);
  if (!j) throw fail("response is not a JSON object");
  for (const char* key : {"risk_level", "explanation", "inaccuracies", "hallucinations"}) {
    if (!j->contains(key)) throw fail(std::string("missing key ") + key);
  }
  if (j->size() != 4) throw fail("expected exactly four keys");
  ClaimVerdict v;
  const auto& r = (*j)["risk_level"];
  if (!r.is_number_integer()) throw fail("risk_level must be an integer");
  auto level = r.get<std::int64_t>();
  if (level < 1 || level > 5) throw fail(fmt::format("risk_level {} outside 1..5", level));
  v.risk_level = static_cast<int>(level);
  if (!(*j)["explanation"].is_string()) throw fail("explanation must be a string");
  v.explanation = (*j)["explanation"].get<std::string>();
  if (!string_array((*j)["inaccuracies"], v.inaccuracies)) throw fail("inaccuracies must be a list of strings");
  if (!string_array((*j)["hallucinations"], v.hallucinations)) throw fail("hallucinations must be a list of strings");
  return v;
}

ClaimVerdict classify(std::string_view full_ai_output, const std::vector<std::string>& explanations,
                      gateway::TextBackend& backend) {
  std::string rendered = render_non_entailed(explanations);
  if (rendered.empty()) return ClaimVerdict{};
  std::string reply;
  try {
    reply = backend.complete("", classification_prompt(full_ai_output, rendered)).text;
  } catch (const gateway::BackendError& e) {
    throw Error(ErrorCode::kClassificationFailed, e.what());
  }
  return parse_classification(reply);
}

EvalReport aggregate(std::vector<GenerationScore> scores) {
  std::sort(scores.begin(), scores.end(),
            [](const GenerationScore& a, const GenerationScore& b) { return a.generation_id < b.generation_id; });
  EvalReport r;
  std::size_t le_one = 0;
  for (const auto& s : scores) {
    r.adjudication_failures += s.failed_adjudications;
    if (s.classification_failed) {
      ++r.classification_failures;
      continue;
    }
    ++r.generations_analyzed;
    r.total_hallucinations += static_cast<std::int64_t>(s.verdict.hallucinations.size());
    r.total_inaccuracies += static_cast<std::int64_t>(s.verdict.inaccuracies.size());
    std::size_t u = s.verdict.unsupported();
    ++r.histogram_counts[u];
    ++r.risk_levels[s.verdict.risk_level];
    if (u <= 1) ++le_one;
  }
  if (r.generations_analyzed > 0) {
    double n = static_cast<double>(r.generations_analyzed);
    r.mean_hallucinations = static_cast<double>(r.total_hallucinations) / n;
    r.mean_inaccuracies = static_cast<double>(r.total_inaccuracies) / n;
    r.mean_unsupported = r.mean_hallucinations + r.mean_inaccuracies;
    r.fraction_le_one = static_cast<double>(le_one) / n;
    for (auto [count, c] : r.histogram_counts) r.histogram[count] = static_cast<double>(c) / n;
  }
  r.generations = std::move(scores);
  return r;
}

std::vector<std::string> sample_sessions(std::vector<std::string> session_ids, double fraction,
                                         std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw Error(ErrorCode::kInvalidParams, fmt::format("sample fraction {} outside (0, 1]", fraction));
  }
  std::sort(session_ids.begin(), session_ids.end());
  session_ids.erase(std::unique(session_ids.begin(), session_ids.end()), session_ids.end());
  if (session_ids.empty()) return {};
  auto n = session_ids.size();
  auto want = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  want = std::clamp<std::size_t>(want, 1, n);
  std::vector<std::pair<std::string, std::string>> ranked;
  ranked.reserve(n);
  for (auto& id : session_ids) ranked.emplace_back(text::sha256_hex(fmt::format("{}:{}", seed, id)), id);
  std::sort(ranked.begin(), ranked.end());
  std::vector<std::string> out;
  out.reserve(want);
  for (std::size_t i = 0; i < want; ++i) out.push_back(std::move(ranked[i].second));
  std::sort(out.begin(), out.end());
  return out;
}

EvalReport score_corpus(const std::vector<GenerationInput>& generations,
                        const gateway::EmbeddingBackend& embedder,
                        gateway::TextBackend& entailment_backend,
                        gateway::TextBackend& classification_backend, const ScoreOptions& options) {
  std::vector<std::string> all_sessions;
  for (const auto& g : generations) all_sessions.push_back(g.session_id);
  std::sort(all_sessions.begin(), all_sessions.end());
  all_sessions.erase(std::unique(all_sessions.begin(), all_sessions.end()), all_sessions.end());
  auto sampled = sample_sessions(all_sessions, options.sample_fraction, options.seed);
  std::set<std::string> keep(sampled.begin(), sampled.end());

  std::size_t in_sample = 0;
  std::vector<const GenerationInput*> work;
  for (const auto& g : generations) {
    if (!keep.contains(g.session_id)) continue;
    ++in_sample;
    if (g.linguistic_task == options.summarization_task) work.push_back(&g);
  }
  std::sort(work.begin(), work.end(),
            [](const GenerationInput* a, const GenerationInput* b) { return a->generation_id < b->generation_id; });

  // Sessions share their source record across turns; index each distinct text once.
  std::vector<std::string_view> sources;
  std::unordered_map<std::string_view, std::size_t> source_slot;
  for (const auto* g : work) {
    if (source_slot.emplace(g->source_text, sources.size()).second) sources.push_back(g->source_text);
  }
  std::vector<ChunkIndex> indices(sources.size());
  parallel_for(sources.size(), options.parallelism,
               [&](std::size_t i) { indices[i] = build_index(sources[i], embedder); });

  std::vector<GenerationScore> scores(work.size());
  parallel_for(work.size(), options.parallelism, [&](std::size_t i) {
    const auto& g = *work[i];
    const auto& index = indices[source_slot.at(g.source_text)];
    GenerationScore s;
    s.generation_id = g.generation_id;
    auto summary_chunks = context::chunk_text(g.output, kChunkSize, kChunkOverlap);
    s.summary_chunks = summary_chunks.size();
    std::vector<std::string> explanations;
    for (const auto& c : summary_chunks) {
      auto hits = retrieve_support(c.text, index, embedder, options.top_k);
      try {
        auto v = adjudicate(c.index, c.text, render_source_chunks(index, hits), entailment_backend);
        if (!v.all_relevant_facts_entailed) {
          ++s.non_entailed_chunks;
          explanations.push_back(v.explanation);
        }
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kAdjudicationFailed) throw;
        ++s.failed_adjudications;
      }
    }
    try {
      s.verdict = classify(g.output, explanations, classification_backend);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kClassificationFailed) throw;
      s.classification_failed = true;
    }
    scores[i] = std::move(s);
  });

  EvalReport r = aggregate(std::move(scores));
  r.sessions_total = all_sessions.size();
  r.sessions_sampled = sampled.size();
  r.generations_in_sample = in_sample;
  r.summarization_generations = work.size();
  return r;
}

std::string report_to_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["sessions_total"] = r.sessions_total;
  j["sessions_sampled"] = r.sessions_sampled;
  j["generations_in_sample"] = r.generations_in_sample;
  j["summarization_generations"] = r.summarization_generations;
  j["generations_analyzed"] = r.generations_analyzed;
  j["adjudication_failures"] = r.adjudication_failures;
  j["classification_failures"] = r.classification_failures;
  j["total_hallucinations"] = r.total_hallucinations;
  j["total_inaccuracies"] = r.total_inaccuracies;
  j["mean_unsupported"] = r.mean_unsupported;
  j["mean_hallucinations"] = r.mean_hallucinations;
  j["mean_inaccuracies"] = r.mean_inaccuracies;
  j["fraction_le_one"] = r.fraction_le_one;
  auto& h = j["histogram"] = nlohmann::ordered_json::object();
  for (auto [k, v] : r.histogram) h[std::to_string(k)] = v;
  auto& rl = j["risk_levels"] = nlohmann::ordered_json::object();
  for (auto [k, v] : r.risk_levels) rl[std::to_string(k)] = v;
  auto& gens = j["generations"] = nlohmann::ordered_json::array();
  for (const auto& g : r.generations) {
    nlohmann::ordered_json e;
    e["generation_id"] = g.generation_id;
    e["summary_chunks"] = g.summary_chunks;
    e["non_entailed_chunks"] = g.non_entailed_chunks;
    e["failed_adjudications"] = g.failed_adjudications;
    e["classification_failed"] = g.classification_failed;
    e["risk_level"] = g.verdict.risk_level;
    e["hallucinations"] = g.verdict.hallucinations;
    e["inaccuracies"] = g.verdict.inaccuracies;
    gens.push_back(std::move(e));
  }
  return j.dump(2) + "\n";
}

std::string render_report_text(const EvalReport& r) {
  std::string out;
  out += fmt::format("sessions sampled: {} of {}\n", r.sessions_sampled, r.sessions_total);
  out += fmt::format("generations in sample: {} ({} summarization)\n", r.generations_in_sample,
                     r.summarization_generations);
  out += fmt::format("generations analyzed: {} (adjudication failures {}, classification failures {})\n",
                     r.generations_analyzed, r.adjudication_failures, r.classification_failures);
  out += fmt::format("mean unsupported claims per generation: {:.2f} ({:.2f} hallucinations and {:.2f} inaccuracies)\n",
                     r.mean_unsupported, r.mean_hallucinations, r.mean_inaccuracies);
  out += fmt::format("generations with at most one unsupported claim: {}\n",
                     text::format_percent(r.fraction_le_one, 0));
  out += "risk levels:";
  for (auto [k, v] : r.risk_levels) out += fmt::format(" {}={}", k, v);
  out += "\n\nunsupported claims | share of generations\n";
  constexpr int kBarWidth = 50;
  for (auto [k, v] : r.histogram) {
    int bar = static_cast<int>(std::lround(v * kBarWidth));
    out += fmt::format("{:>18} | {:<{}} {:.1f}%\n", k, std::string(static_cast<std::size_t>(bar), '#'),
                       kBarWidth, v * 100.0);
  }
  return out;
}

}  // namespace clinctx::claims
