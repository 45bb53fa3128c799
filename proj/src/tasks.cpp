#include "clinctx/tasks.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <nlohmann/json.hpp>
#include <random>
#include <sstream>

#include "clinctx/concurrency.hpp"
#include "clinctx/error.hpp"
#include "clinctx/prompts.hpp"
#include "clinctx/text.hpp"

namespace clinctx::tasks {
namespace {

using nlohmann::json;

double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Index drawn with probability proportional to weights[i]; -1 if all zero.
std::ptrdiff_t weighted_pick(const std::vector<double>& weights, std::mt19937_64& rng) {
  double total = 0;
  for (double w : weights) total += w;
  if (!(total > 0)) return -1;
  double r = uniform01(rng) * total;
  double acc = 0;
  std::ptrdiff_t last = -1;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0) continue;
    acc += weights[i];
    last = static_cast<std::ptrdiff_t>(i);
    if (r < acc) return last;
  }
  return last;
}

std::size_t nearest(const std::vector<double>& p, const std::vector<std::vector<double>>& centroids) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.size(); ++c) {
    double d = squared_distance(p, centroids[c]);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

std::vector<TaskRate> rates_from(const std::map<std::string, TaskRate>& m) {
  std::vector<TaskRate> out;
  for (const auto& [_, r] : m) {
    if (r.n() > 0) out.push_back(r);
  }
  return out;
}

}  // namespace

std::string_view linguistic_task_name(int task) {
  switch (task) {
    case 0: return "None";
    case 1: return "Question Answering";
    case 2: return "Text Classification";
    case 3: return "Information Extraction";
    case 4: return "Summarization";
    case 5: return "Translation";
  }
  throw Error(ErrorCode::kInvalidParams, fmt::format("linguistic task {} outside 0..5", task));
}

TaskCatalog::TaskCatalog(std::vector<std::string> entries) : entries_(std::move(entries)) {
  std::vector<std::string> sorted = entries_;
  std::sort(sorted.begin(), sorted.end());
  auto dup = std::adjacent_find(sorted.begin(), sorted.end());
  if (dup != sorted.end()) throw Error(ErrorCode::kInvalidParams, "duplicate catalog entry: " + *dup);
}

TaskCatalog TaskCatalog::builtin() { return parse(prompts::task_catalog()); }

TaskCatalog TaskCatalog::parse(std::string_view text) {
  std::vector<std::string> entries;
  for (auto& line : text::split_lines(text)) {
    std::string_view t = text::trim_right(line);
    if (!t.empty()) entries.emplace_back(t);
  }
  return TaskCatalog(std::move(entries));
}

TaskCatalog TaskCatalog::from_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::optional<std::string> TaskCatalog::match(std::string_view s) const {
  for (const auto& e : entries_) {
    if (e == s) return e;
  }
  std::string key = text::to_lower(text::trim(s));
  for (const auto& e : entries_) {
    if (text::to_lower(e) == key) return e;
  }
  return std::nullopt;
}

std::string normalization_prompt(std::string_view query) {
  return text::fill_template(prompts::task_normalization(), {{"USER_QUERY", std::string(query)}});
}

std::string normalize_medical(std::string_view query, const TaskCatalog& catalog, gateway::TextBackend& backend) {
  if (text::trim(query).empty()) throw Error(ErrorCode::kEmptyInput, "empty query");
  std::string reply;
  try {
    reply = backend.complete("", normalization_prompt(query)).text;
  } catch (const gateway::BackendError& e) {
    throw Error(ErrorCode::kNormalizationFailed, e.what());
  }
  std::string out(text::trim(reply));
  if (out.empty()) throw Error(ErrorCode::kNormalizationFailed, "empty response");
  if (auto hit = catalog.match(out)) return *hit;
  return out;
}

std::string linguistic_prompt(std::string_view query) {
  return text::fill_template(prompts::linguistic_task(), {{"user_question", std::string(query)}});
}

int parse_linguistic(std::string_view response) {
  auto fail = [](const std::string& why) { return Error(ErrorCode::kClassificationFailed, why); };
  std::string_view t = text::trim(response);
  json j = json::parse(t.begin(), t.end(), nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw fail("response is not a JSON object");
  if (j.size() != 1 || !j.contains("number")) throw fail("expected exactly the key \"number\"");
  const auto& n = j["number"];
  if (!n.is_number_integer()) throw fail("number must be an integer");
  auto v = n.get<std::int64_t>();
  if (v < 0 || v > 5) throw fail(fmt::format("task {} outside 0..5", v));
  return static_cast<int>(v);
}

int classify_linguistic(std::string_view query, gateway::TextBackend& backend) {
  if (text::trim(query).empty()) throw Error(ErrorCode::kEmptyInput, "empty query");
  std::string reply;
  try {
    reply = backend.complete("", linguistic_prompt(query)).text;
  } catch (const gateway::BackendError& e) {
    throw Error(ErrorCode::kClassificationFailed, e.what());
  }
  return parse_linguistic(reply);
}

std::optional<std::size_t> ClusterModel::cluster_of(std::string_view label) const {
  for (std::size_t i = 0; i < clusters.size(); ++i) {
    const auto& ls = clusters[i].labels;
    if (std::binary_search(ls.begin(), ls.end(), label)) return i;
  }
  return std::nullopt;
}

double cosine_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0 || nb == 0) return 1.0;
  return 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
}

std::vector<double> weighted_mean(const std::vector<std::size_t>& members,
                                  const std::vector<std::vector<double>>& points,
                                  const std::vector<double>& weights) {
  std::vector<double> c(points.empty() ? 0 : points.front().size(), 0.0);
  double total = 0;
  for (auto m : members) {
    total += weights[m];
    for (std::size_t d = 0; d < c.size(); ++d) c[d] += weights[m] * points[m][d];
  }
  if (total > 0) {
    for (auto& v : c) v /= total;
  }
  return c;
}

std::vector<MergeGroup> merge_clusters(std::vector<MergeGroup> groups,
                                       const std::vector<std::vector<double>>& points,
                                       const std::vector<double>& weights, double threshold) {
  const std::size_t n = groups.size();
  std::vector<std::vector<double>> centroids(n);
  for (std::size_t i = 0; i < n; ++i) centroids[i] = weighted_mean(groups[i].members, points, weights);
  std::vector<bool> alive(n, true);
  std::vector<std::vector<double>> dist(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) dist[i][j] = cosine_distance(centroids[i], centroids[j]);
  }
  while (true) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t bi = 0, bj = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!alive[i]) continue;
      for (std::size_t j = i + 1; j < n; ++j) {
        if (alive[j] && dist[i][j] < best) {
          best = dist[i][j];
          bi = i;
          bj = j;
        }
      }
    }
    if (!(best <= threshold)) break;
    auto& into = groups[bi].members;
    into.insert(into.end(), groups[bj].members.begin(), groups[bj].members.end());
    std::sort(into.begin(), into.end());
    alive[bj] = false;
    centroids[bi] = weighted_mean(into, points, weights);
    for (std::size_t o = 0; o < n; ++o) {
      if (!alive[o] || o == bi) continue;
      double d = cosine_distance(centroids[bi], centroids[o]);
      if (o < bi) dist[o][bi] = d;
      else dist[bi][o] = d;
    }
  }
  std::vector<MergeGroup> out;
  for (std::size_t i = 0; i < n; ++i) {
    if (alive[i]) out.push_back(std::move(groups[i]));
  }
  return out;
}

ClusterModel cluster_tasks(const std::vector<std::string>& labels, const gateway::EmbeddingBackend& embedder,
                           std::size_t k, std::uint64_t seed, double merge_threshold) {
  if (labels.empty()) throw Error(ErrorCode::kEmptyInput, "no labels to cluster");
  if (k == 0) throw Error(ErrorCode::kInvalidParams, "k must be positive");
  std::map<std::string, std::size_t> counts;
  for (const auto& l : labels) ++counts[l];

  std::vector<std::string> names;
  std::vector<std::vector<double>> points;
  std::vector<double> weights;
  for (const auto& [label, c] : counts) {
    names.push_back(label);
    points.push_back(embedder.embed(label));
    weights.push_back(static_cast<double>(c));
  }
  const std::size_t n = points.size();

  ClusterModel model;
  model.k = k;
  model.k_effective = std::min(k, n);
  model.seed = seed;
  model.merge_threshold = merge_threshold;
  const std::size_t kk = model.k_effective;

  // k-means++ seeding over the weighted distinct points.
  std::mt19937_64 rng(seed);
  std::vector<std::vector<double>> centroids;
  std::vector<bool> chosen(n, false);
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  auto add_center = [&](std::size_t p) {
    chosen[p] = true;
    centroids.push_back(points[p]);
    for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], squared_distance(points[i], points[p]));
  };
  add_center(static_cast<std::size_t>(weighted_pick(weights, rng)));
  while (centroids.size() < kk) {
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) w[i] = chosen[i] ? 0.0 : weights[i] * d2[i];
    auto p = weighted_pick(w, rng);
    if (p < 0) {
      // Remaining points coincide with chosen centers.
      p = static_cast<std::ptrdiff_t>(std::find(chosen.begin(), chosen.end(), false) - chosen.begin());
    }
    add_center(static_cast<std::size_t>(p));
  }

  std::vector<std::size_t> assign(n, 0);
  for (int it = 0; it < kMaxKMeansIterations; ++it) {
    model.iterations = it + 1;
    bool changed = it == 0;
    for (std::size_t i = 0; i < n; ++i) {
      auto c = nearest(points[i], centroids);
      if (c != assign[i]) changed = true;
      assign[i] = c;
    }
    std::vector<std::size_t> size(kk, 0);
    for (auto a : assign) ++size[a];
    for (std::size_t c = 0; c < kk; ++c) {
      if (size[c] > 0) continue;
      std::ptrdiff_t far = -1;
      double far_d = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (size[assign[i]] < 2) continue;
        double d = squared_distance(points[i], centroids[assign[i]]);
        if (d > far_d) {
          far_d = d;
          far = static_cast<std::ptrdiff_t>(i);
        }
      }
      if (far < 0) continue;
      --size[assign[far]];
      assign[far] = c;
      size[c] = 1;
      changed = true;
    }
    for (std::size_t c = 0; c < kk; ++c) {
      std::vector<std::size_t> members;
      for (std::size_t i = 0; i < n; ++i) {
        if (assign[i] == c) members.push_back(i);
      }
      if (!members.empty()) centroids[c] = weighted_mean(members, points, weights);
    }
    if (!changed) break;
  }

  std::vector<MergeGroup> groups(kk);
  for (std::size_t i = 0; i < n; ++i) groups[assign[i]].members.push_back(i);
  std::erase_if(groups, [](const MergeGroup& g) { return g.members.empty(); });
  groups = merge_clusters(std::move(groups), points, weights, merge_threshold);

  for (const auto& g : groups) {
    Cluster cl;
    cl.centroid = weighted_mean(g.members, points, weights);
    double best = std::numeric_limits<double>::infinity();
    for (auto m : g.members) {  // ascending index == lexicographic label order
      cl.labels.push_back(names[m]);
      cl.weight += counts[names[m]];
      double d = squared_distance(points[m], cl.centroid);
      if (d < best) {
        best = d;
        cl.name = names[m];
      }
    }
    model.clusters.push_back(std::move(cl));
  }
  return model;
}

LabelResult label_queries(const std::vector<QueryRecord>& queries, const TaskCatalog& catalog,
                          gateway::TextBackend& normalizer, gateway::TextBackend& linguistic,
                          const gateway::EmbeddingBackend& embedder, const LabelOptions& options) {
  struct Slot {
    std::optional<std::string> normalized;
    std::optional<int> task;
  };
  std::vector<Slot> slots(queries.size());
  parallel_for(queries.size(), options.parallelism, [&](std::size_t i) {
    try {
      slots[i].normalized = normalize_medical(queries[i].text, catalog, normalizer);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kNormalizationFailed && e.code() != ErrorCode::kEmptyInput) throw;
    }
    try {
      slots[i].task = classify_linguistic(queries[i].text, linguistic);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kClassificationFailed && e.code() != ErrorCode::kEmptyInput) throw;
    }
  });

  LabelResult r;
  std::vector<std::string> normalized;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    if (!slots[i].task) ++r.classification_failures;
    if (!slots[i].normalized) {
      ++r.normalization_failures;
      continue;
    }
    TaskLabel l;
    l.query_id = queries[i].query_id;
    l.normalized = *slots[i].normalized;
    l.linguistic_task = slots[i].task.value_or(0);
    l.thumbs_up = queries[i].thumbs_up;
    normalized.push_back(l.normalized);
    r.labels.push_back(std::move(l));
  }
  if (normalized.empty()) throw Error(ErrorCode::kEmptyInput, "no query could be normalized");
  r.model = cluster_tasks(normalized, embedder, options.k, options.seed, options.merge_threshold);
  for (auto& l : r.labels) {
    l.cluster_id = *r.model.cluster_of(l.normalized);
    l.cluster_name = r.model.clusters[l.cluster_id].name;
  }
  return r;
}

FeedbackReport feedback_by_task(const std::vector<TaskLabel>& labels) {
  std::map<std::string, TaskRate> med, ling, pair;
  std::map<int, TaskRate> ling_by_num;
  for (const auto& l : labels) {
    if (!l.thumbs_up) continue;
    std::string lname(linguistic_task_name(l.linguistic_task));
    std::string pkey = l.cluster_name + " / " + lname;
    for (auto* e : {&med[l.cluster_name], &ling_by_num[l.linguistic_task], &pair[pkey]}) {
      (*l.thumbs_up ? e->positive : e->negative)++;
    }
    med[l.cluster_name].task = l.cluster_name;
    ling_by_num[l.linguistic_task].task = lname;
    pair[pkey].task = pkey;
  }
  FeedbackReport r;
  r.by_medical = rates_from(med);
  for (const auto& [_, v] : ling_by_num) {
    if (v.n() > 0) r.by_linguistic.push_back(v);
  }
  r.by_pair = rates_from(pair);
  return r;
}

std::vector<Annotation> parse_annotations(std::string_view jsonl) {
  std::vector<Annotation> out;
  std::size_t line_no = 0;
  for (const auto& line : text::split_lines(jsonl)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    json j = json::parse(line, nullptr, false);
    auto bad = [&] { return Error(ErrorCode::kInvalidParams, fmt::format("annotation line {} is malformed", line_no)); };
    if (j.is_discarded() || !j.is_object()) throw bad();
    if (!j.contains("query_id") || !j.contains("annotator") || !j.contains("judgment")) throw bad();
    if (!j["query_id"].is_string() || !j["annotator"].is_string() || !j["judgment"].is_string()) throw bad();
    auto judgment = j["judgment"].get<std::string>();
    if (judgment != "appropriate" && judgment != "inappropriate") throw bad();
    out.push_back({j["query_id"].get<std::string>(), j["annotator"].get<std::string>(), judgment == "appropriate"});
  }
  return out;
}

AgreementResult agreement_rate(const std::vector<TaskLabel>& labels, const std::vector<Annotation>& annotations) {
  if (annotations.empty()) throw Error(ErrorCode::kEmptyInput, "no annotations");
  std::vector<std::string> ids;
  for (const auto& l : labels) ids.push_back(l.query_id);
  std::sort(ids.begin(), ids.end());
  std::map<std::string, std::pair<std::size_t, std::size_t>> tally;  // appropriate, total
  for (const auto& a : annotations) {
    if (!std::binary_search(ids.begin(), ids.end(), a.query_id)) {
      throw Error(ErrorCode::kUnmatchedIds, "annotation references unknown query " + a.query_id);
    }
    auto& t = tally[a.annotator];
    t.first += a.appropriate ? 1 : 0;
    ++t.second;
  }
  AgreementResult r;
  double sum = 0;
  for (const auto& [who, t] : tally) {
    double rate = static_cast<double>(t.first) / static_cast<double>(t.second);
    r.per_annotator[who] = rate;
    sum += rate;
  }
  r.average = sum / static_cast<double>(tally.size());
  return r;
}

TaskReport build_report(const LabelResult& result) {
  TaskReport r;
  r.queries = result.labels.size();
  r.clusters = result.model.clusters.size();
  std::map<std::string, std::size_t> med;
  std::map<int, std::size_t> ling;
  for (const auto& l : result.labels) {
    ++med[l.cluster_name];
    ++ling[l.linguistic_task];
  }
  double n = r.queries ? static_cast<double>(r.queries) : 1.0;
  for (const auto& [name, c] : med) r.medical.push_back({name, c, static_cast<double>(c) / n});
  std::stable_sort(r.medical.begin(), r.medical.end(),
                   [](const TaskShare& a, const TaskShare& b) { return a.count > b.count; });
  for (const auto& [t, c] : ling) {
    r.linguistic.push_back({std::string(linguistic_task_name(t)), c, static_cast<double>(c) / n});
  }
  r.feedback = feedback_by_task(result.labels);
  return r;
}

std::string report_to_json(const TaskReport& r) {
  using oj = nlohmann::ordered_json;
  auto shares = [](const std::vector<TaskShare>& v) {
    oj a = oj::array();
    for (const auto& s : v) a.push_back(oj{{"task", s.task}, {"count", s.count}, {"share", s.share}});
    return a;
  };
  auto rates = [](const std::vector<TaskRate>& v) {
    oj a = oj::array();
    for (const auto& t : v) {
      a.push_back(oj{{"task", t.task}, {"positive", t.positive}, {"negative", t.negative},
                     {"positive_rate", t.positive_rate()}});
    }
    return a;
  };
  oj j;
  j["queries"] = r.queries;
  j["clusters"] = r.clusters;
  j["medical_tasks"] = shares(r.medical);
  j["linguistic_tasks"] = shares(r.linguistic);
  j["feedback"] = oj{{"by_medical", rates(r.feedback.by_medical)},
                     {"by_linguistic", rates(r.feedback.by_linguistic)},
                     {"by_pair", rates(r.feedback.by_pair)}};
  return j.dump(2) + "\n";
}

std::string render_report_text(const TaskReport& r, std::size_t top_n) {
  std::string out = fmt::format("queries: {}  clusters: {}\n\ntop medical tasks\n", r.queries, r.clusters);
  for (std::size_t i = 0; i < r.medical.size() && i < top_n; ++i) {
    const auto& s = r.medical[i];
    out += fmt::format("  {:>6}  {:>5}  {}\n", text::format_percent(s.share, 1), s.count, s.task);
  }
  out += "\nlinguistic tasks\n";
  for (const auto& s : r.linguistic) {
    out += fmt::format("  {:>6}  {:>5}  {}\n", text::format_percent(s.share, 1), s.count, s.task);
  }
  auto table = [&](std::string_view title, const std::vector<TaskRate>& v) {
    out += fmt::format("\npositive feedback {}\n", title);
    for (const auto& t : v) {
      out += fmt::format("  {:>6}  n={:<5} {}\n", text::format_percent(t.positive_rate(), 1), t.n(), t.task);
    }
  };
  table("by medical task", r.feedback.by_medical);
  table("by linguistic task", r.feedback.by_linguistic);
  table("by medical and linguistic task", r.feedback.by_pair);
  return out;
}

}  // namespace clinctx::tasks
