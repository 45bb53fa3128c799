#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "clinctx/claims.hpp"
#include "clinctx/mock_backends.hpp"
#include "clinctx/text.hpp"
#include "test_support.hpp"

using namespace clinctx;
using namespace clinctx::claims;

TEST_CASE("entailment reply contract") {
  auto v = parse_entailment(R"({"all_relevant_facts_entailed": false, "explanation": "x"})");
  CHECK_FALSE(v.all_relevant_facts_entailed);
  CHECK(v.explanation == "x");
  CHECK(parse_entailment("```json\n{\"all_relevant_facts_entailed\": true, \"explanation\": \"\"}\n```")
            .all_relevant_facts_entailed);
  for (const char* bad : {"not json", "[]", R"({"all_relevant_facts_entailed": "true", "explanation": "x"})",
                          R"({"all_relevant_facts_entailed": true})",
                          R"({"all_relevant_facts_entailed": true, "explanation": "x", "extra": 1})"}) {
    CHECK_THROWS_AS(parse_entailment(bad), Error);
  }
}

TEST_CASE("classification reply contract") {
  auto v = parse_classification(
      R"({"risk_level": 2, "explanation": "e", "inaccuracies": ["a"], "hallucinations": ["b", "c"]})");
  CHECK(v.risk_level == 2);
  CHECK(v.unsupported() == 3);
  for (const char* bad :
       {R"({"risk_level": 0, "explanation": "e", "inaccuracies": [], "hallucinations": []})",
        R"({"risk_level": 6, "explanation": "e", "inaccuracies": [], "hallucinations": []})",
        R"({"risk_level": 2.5, "explanation": "e", "inaccuracies": [], "hallucinations": []})",
        R"({"risk_level": 2, "explanation": "e", "inaccuracies": [1], "hallucinations": []})",
        R"({"risk_level": 2, "explanation": "e", "inaccuracies": []})"}) {
    CHECK_THROWS_AS(parse_classification(bad), Error);
  }
}

TEST_CASE("nothing to classify skips the backend") {
  gateway::ScriptedBackend b;
  auto v = classify("output", {"", "  "}, b);
  CHECK(v.risk_level == 1);
  CHECK(v.unsupported() == 0);
  CHECK(b.call_count() == 0);
}

TEST_CASE("retrieval equals a brute-force cosine ranking") {
  gateway::TrigramHashEmbedder emb(128);
  std::mt19937_64 rng(11);
  for (int round = 0; round < 10; ++round) {
    std::string source = testsupport::random_text(rng, 3000 + rng() % 5000, round % 2 == 1);
    auto index = build_index(source, emb);
    std::string query = testsupport::random_text(rng, 200, false);
    std::size_t k = 1 + rng() % 20;
    auto hits = retrieve_support(query, index, emb, k);
    auto q = emb.embed(query);
    std::vector<std::pair<double, std::size_t>> oracle;
    for (std::size_t i = 0; i < index.chunks.size(); ++i) {
      oracle.push_back({testsupport::cosine(q, emb.embed(index.chunks[i].text)), index.chunks[i].offset});
    }
    std::sort(oracle.begin(), oracle.end(), [](auto& a, auto& b) {
      return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    REQUIRE(hits.size() == std::min(k, oracle.size()));
    for (std::size_t i = 0; i < hits.size(); ++i) {
      CHECK(hits[i].offset == oracle[i].second);
      CHECK(hits[i].similarity == doctest::Approx(oracle[i].first));
    }
  }
}

TEST_CASE("rendered chunks parse and stitch back to the source") {
  gateway::TrigramHashEmbedder emb(64);
  std::mt19937_64 rng(3);
  std::string source = testsupport::random_text(rng, 2600, true);
  auto index = build_index(source, emb);
  std::vector<SupportHit> hits;
  for (std::size_t i = index.chunks.size(); i-- > 0;) hits.push_back({i, index.chunks[i].offset, 0.0});
  auto parsed = parse_source_chunks(render_source_chunks(index, hits));
  REQUIRE(parsed.size() == index.chunks.size());
  auto stitched = stitch_source_chunks(parsed);
  REQUIRE(stitched.size() == 1);
  CHECK(stitched[0] == source);
  // Non-adjacent chunks stay separate segments.
  std::vector<SupportHit> gap = {{0, index.chunks[0].offset, 0}, {3, index.chunks[3].offset, 0}};
  CHECK(stitch_source_chunks(parse_source_chunks(render_source_chunks(index, gap))).size() == 2);
}

TEST_CASE("session sampling") {
  std::vector<std::string> ids;
  for (int i = 0; i < 200; ++i) ids.push_back("s-" + std::to_string(i));
  auto a = sample_sessions(ids, 0.10, 7);
  CHECK(a.size() == 20);
  CHECK(std::is_sorted(a.begin(), a.end()));
  CHECK(a == sample_sessions(ids, 0.10, 7));
  std::vector<std::string> shuffled = ids;
  std::shuffle(shuffled.begin(), shuffled.end(), std::mt19937_64(1));
  CHECK(a == sample_sessions(shuffled, 0.10, 7));
  CHECK(a != sample_sessions(ids, 0.10, 8));
  CHECK(sample_sessions(ids, 0.001, 7).size() == 1);
  CHECK_THROWS_AS(sample_sessions(ids, 0.0, 7), Error);
  CHECK_THROWS_AS(sample_sessions(ids, 1.5, 7), Error);
  CHECK(sample_sessions(ids, 1.0, 7).size() == 200);
  // Oracle: rank by digest of "<seed>:<id>".
  std::vector<std::pair<std::string, std::string>> ranked;
  for (const auto& id : ids) ranked.push_back({text::sha256_hex("7:" + id), id});
  std::sort(ranked.begin(), ranked.end());
  std::vector<std::string> want;
  for (int i = 0; i < 20; ++i) want.push_back(ranked[i].second);
  std::sort(want.begin(), want.end());
  CHECK(a == want);
}

TEST_CASE("aggregate statistics") {
  auto score = [](std::string id, int h, int i, bool failed = false) {
    GenerationScore s;
    s.generation_id = std::move(id);
    s.classification_failed = failed;
    s.verdict.hallucinations.assign(h, "h");
    s.verdict.inaccuracies.assign(i, "i");
    s.verdict.risk_level = h + i > 0 ? 3 : 1;
    return s;
  };
  auto r = aggregate({score("a", 0, 0), score("b", 1, 0), score("c", 2, 1), score("d", 5, 5, true)});
  CHECK(r.generations_analyzed == 3);
  CHECK(r.classification_failures == 1);
  CHECK(r.mean_hallucinations == doctest::Approx(1.0));
  CHECK(r.mean_inaccuracies == doctest::Approx(1.0 / 3));
  CHECK(r.mean_unsupported == doctest::Approx(4.0 / 3));
  CHECK(r.fraction_le_one == doctest::Approx(2.0 / 3));
  CHECK(r.histogram_counts == std::map<std::size_t, std::size_t>{{0, 1}, {1, 1}, {3, 1}});
  CHECK(r.risk_levels == std::map<int, std::size_t>{{1, 1}, {3, 2}});
}

TEST_CASE("planted claims are counted exactly") {
  gateway::TrigramHashEmbedder emb(256);
  gateway::ContainmentEntailmentBackend ent;
  gateway::KeywordClaimClassifier cls({"contradicts"});
  std::string source =
      "Patient admitted with community acquired pneumonia. Started on ceftriaxone. "
      "Oxygen weaned to room air on day three. Discharged home in stable condition.";
  std::vector<GenerationInput> gens;
  gens.push_back({"g1", "s1", "Patient admitted with community acquired pneumonia. Started on ceftriaxone.", source, 4});
  gens.push_back({"g2", "s2",
                  "Started on ceftriaxone. Patient had a fall at home. Renal function contradicts the chart.",
                  source, 4});
  gens.push_back({"g3", "s3", "Patient had a stroke.", source, 1});  // not a summarization turn
  auto r = score_corpus(gens, emb, ent, cls, {.parallelism = 2});
  CHECK(r.sessions_total == 3);
  CHECK(r.summarization_generations == 2);
  CHECK(r.generations_analyzed == 2);
  CHECK(r.total_hallucinations == 1);
  CHECK(r.total_inaccuracies == 1);
  CHECK(r.generations[0].verdict.unsupported() == 0);
  CHECK(r.generations[1].verdict.unsupported() == 2);
  CHECK(report_to_json(r) == report_to_json(score_corpus(gens, emb, ent, cls, {.parallelism = 1})));
}

TEST_CASE("adjudication retries once, then counts a failure") {
  gateway::ScriptedBackend bad({}, std::string("nonsense"));
  CHECK_THROWS_AS(adjudicate(0, "x", "", bad), Error);
  CHECK(bad.call_count() == 2);
  gateway::ScriptedBackend flaky(
      {{.contains = "x", .response = "garbage", .times = 1},
       {.contains = "x", .response = R"({"all_relevant_facts_entailed": true, "explanation": "ok"})"}},
      std::nullopt);
  CHECK(adjudicate(3, "x", "", flaky).summary_chunk_index == 3);
}
