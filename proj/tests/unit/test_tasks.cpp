#include <doctest.h>

#include <random>

#include "clinctx/mock_backends.hpp"
#include "clinctx/tasks.hpp"
#include "clinctx/text.hpp"
#include "oracles.hpp"

using namespace clinctx;
using namespace clinctx::tasks;

namespace {

std::vector<std::string> label_corpus(std::size_t n, std::uint64_t seed) {
  static const std::vector<std::string> stems = {
      "Summarize hospital course", "Medication reconciliation", "Discharge planning",
      "Lab trend review",          "Imaging result lookup",     "Consult question drafting",
      "Care gap identification",   "Prior authorization",       "Sepsis risk review",
      "Wound care documentation"};
  std::mt19937_64 rng(seed);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::string l = stems[rng() % stems.size()];
    if (rng() % 3 == 0) l += " for " + std::to_string(rng() % 7);
    out.push_back(l);
  }
  return out;
}

}  // namespace

TEST_CASE("clustering is deterministic for a seed") {
  gateway::TrigramHashEmbedder emb(128);
  auto labels = label_corpus(400, 1);
  auto first = cluster_tasks(labels, emb, 12, 42, 0.10);
  for (int run = 0; run < 4; ++run) CHECK(cluster_tasks(labels, emb, 12, 42, 0.10) == first);
  // Every distinct label lands in exactly one cluster and weights add up.
  std::size_t weight = 0;
  for (const auto& c : first.clusters) weight += c.weight;
  CHECK(weight == labels.size());
  for (const auto& l : labels) CHECK(first.cluster_of(l).has_value());
}

TEST_CASE("k caps at the number of distinct labels") {
  gateway::TrigramHashEmbedder emb(64);
  auto m = cluster_tasks({"a b c", "a b c", "x y z"}, emb, 1000, 1, 0.0);
  CHECK(m.k == 1000);
  CHECK(m.k_effective == 2);
  CHECK(m.clusters.size() == 2);
  CHECK_THROWS_AS(cluster_tasks({}, emb), Error);
}

TEST_CASE("merge equals the exhaustive recomputation") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> nd;
  for (int round = 0; round < 30; ++round) {
    std::size_t npts = 5 + rng() % 30;
    std::vector<std::vector<double>> points(npts, std::vector<double>(6));
    std::vector<double> weights(npts);
    for (std::size_t i = 0; i < npts; ++i) {
      for (auto& x : points[i]) x = nd(rng) + (i % 3 == 0 ? 3.0 : 0.0);
      weights[i] = 1 + static_cast<double>(rng() % 5);
    }
    std::size_t ng = 2 + rng() % std::min<std::size_t>(19, npts - 1);
    std::vector<MergeGroup> groups(ng);
    std::vector<std::vector<std::size_t>> plain(ng);
    for (std::size_t i = 0; i < npts; ++i) {
      std::size_t g = i < ng ? i : rng() % ng;
      groups[g].members.push_back(i);
      plain[g].push_back(i);
    }
    double threshold = 0.05 * static_cast<double>(rng() % 10);
    auto got = merge_clusters(groups, points, weights, threshold);
    auto want = testsupport::merge_oracle(plain, points, weights, threshold);
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i].members == want[i]);
  }
}

TEST_CASE("normalization keeps catalog entries byte exact") {
  auto catalog = TaskCatalog::builtin();
  REQUIRE(catalog.size() > 0);
  const std::string entry = catalog.entries().front();
  gateway::ScriptedBackend b({}, "  " + text::to_lower(entry) + "\n");
  CHECK(normalize_medical("anything", catalog, b) == entry);
  gateway::ScriptedBackend empty({}, std::string("   "));
  CHECK_THROWS_AS(normalize_medical("q", catalog, empty), Error);
  CHECK_THROWS_AS(normalize_medical("  ", catalog, b), Error);
}

TEST_CASE("linguistic reply contract") {
  CHECK(parse_linguistic(R"({"number": 4})") == 4);
  CHECK(parse_linguistic(R"({"number": 0})") == 0);
  for (const char* bad : {R"({"number": 6})", R"({"number": "4"})", R"({"n": 4})", "4"}) {
    CHECK_THROWS_AS(parse_linguistic(bad), Error);
  }
  gateway::RuleLinguisticClassifier rule;
  CHECK(classify_linguistic("Summarize this admission", rule) == 4);
  CHECK(classify_linguistic("Translate the discharge instructions into Spanish", rule) == 5);
  CHECK(classify_linguistic("List all antibiotics given", rule) == 3);
  CHECK(classify_linguistic("When was the last echo?", rule) == 1);
}

TEST_CASE("feedback rates and agreement") {
  std::vector<TaskLabel> labels = {
      {"q1", "A", 0, "A", 4, true},  {"q2", "A", 0, "A", 4, false}, {"q3", "B", 1, "B", 1, true},
      {"q4", "B", 1, "B", 1, std::nullopt}};
  auto fb = feedback_by_task(labels);
  REQUIRE(fb.by_medical.size() == 2);
  CHECK(fb.by_medical[0].task == "A");
  CHECK(fb.by_medical[0].positive_rate() == doctest::Approx(0.5));
  CHECK(fb.by_medical[1].n() == 1);
  CHECK(fb.by_pair.size() == 2);

  auto ann = parse_annotations(
      "{\"query_id\":\"q1\",\"annotator\":\"x\",\"judgment\":\"appropriate\"}\n"
      "{\"query_id\":\"q2\",\"annotator\":\"x\",\"judgment\":\"inappropriate\"}\n"
      "\n"
      "{\"query_id\":\"q3\",\"annotator\":\"y\",\"judgment\":\"appropriate\"}\n");
  auto ag = agreement_rate(labels, ann);
  CHECK(ag.per_annotator.at("x") == doctest::Approx(0.5));
  CHECK(ag.per_annotator.at("y") == doctest::Approx(1.0));
  CHECK(ag.average == doctest::Approx(0.75));
  ann.push_back({"q9", "x", true});
  CHECK_THROWS_AS(agreement_rate(labels, ann), Error);
  CHECK_THROWS_AS(agreement_rate(labels, {}), Error);
}

TEST_CASE("labelling pipeline is reproducible") {
  gateway::TrigramHashEmbedder emb(128);
  gateway::RuleTaskNormalizer norm;
  gateway::RuleLinguisticClassifier ling;
  std::vector<QueryRecord> qs;
  const char* texts[] = {"Summarize the hospital course", "What antibiotics is she on?",
                         "List the last three potassium values", "Is this patient a candidate for hospice?",
                         "Translate the discharge summary into Spanish", "Draft a referral letter to cardiology"};
  for (int i = 0; i < 60; ++i) qs.push_back({"q" + std::to_string(i), texts[i % 6], i % 4 == 0 ? std::optional(i % 8 == 0) : std::nullopt});
  LabelOptions opt{.k = 5, .seed = 3, .parallelism = 3};
  auto a = label_queries(qs, TaskCatalog::builtin(), norm, ling, emb, opt);
  auto b = label_queries(qs, TaskCatalog::builtin(), norm, ling, emb, {.k = 5, .seed = 3, .parallelism = 1});
  CHECK(a.labels.size() == 60);
  CHECK(report_to_json(build_report(a)) == report_to_json(build_report(b)));
}
