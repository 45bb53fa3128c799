#include "clinctx/mock_backends.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>
#include <thread>

#include "clinctx/claims.hpp"
#include "clinctx/prompts.hpp"
#include "clinctx/text.hpp"

namespace clinctx::gateway {
namespace {

using nlohmann::json;

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

bool has_alnum(std::string_view s) {
  int n = 0;
  for (char c : s) {
    if (std::isalnum(static_cast<unsigned char>(c)) && ++n >= 2) return true;
  }
  return false;
}

// Sentence-ish fragments: split at newlines and after . ! ? followed by a space.
std::vector<std::string> split_statements(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    std::string_view t = text::trim(cur);
    if (has_alnum(t)) out.emplace_back(t);
    cur.clear();
  };
  for (std::size_t i = 0; i < s.size(); ++i) {
    char c = s[i];
    if (c == '\n') {
      flush();
      continue;
    }
    cur += c;
    if ((c == '.' || c == '!' || c == '?') && (i + 1 == s.size() || s[i + 1] == ' ')) flush();
  }
  flush();
  return out;
}

std::vector<std::string> quoted_segments(std::string_view s) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    std::size_t open = s.find('"', pos);
    if (open == std::string_view::npos) break;
    std::size_t close = s.find('"', open + 1);
    if (close == std::string_view::npos) break;
    out.emplace_back(s.substr(open + 1, close - open - 1));
    pos = close + 1;
  }
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::optional<std::string> extract_between_last(std::string_view haystack, std::string_view open,
                                                std::string_view close) {
  std::size_t start = haystack.rfind(open);
  if (start == std::string_view::npos) return std::nullopt;
  start += open.size();
  std::size_t end = haystack.find(close, start);
  if (end == std::string_view::npos) return std::nullopt;
  return std::string(haystack.substr(start, end - start));
}

ScriptedBackend::ScriptedBackend(std::vector<Rule> rules, std::optional<std::string> default_response,
                                 std::int64_t latency_ms)
    : rules_(std::move(rules)),
      fired_(rules_.size(), 0),
      default_response_(std::move(default_response)),
      latency_ms_(latency_ms) {}

ScriptedBackend ScriptedBackend::from_json(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kConfigError, std::string("mock script: ") + e.what());
  }
  std::vector<Rule> rules;
  for (const auto& r : doc.value("rules", json::array())) {
    Rule rule;
    if (r.contains("digest")) rule.digest = r["digest"].get<std::string>();
    if (r.contains("contains")) {
      if (r["contains"].is_array()) rule.contains_all = r["contains"].get<std::vector<std::string>>();
      else rule.contains = r["contains"].get<std::string>();
    }
    if (r.contains("response")) rule.response = r["response"].get<std::string>();
    if (r.contains("fail")) rule.fail_code = r["fail"].get<std::string>();
    if (r.contains("times")) rule.times = r["times"].get<int>();
    if (r.contains("latency_ms")) rule.latency_ms = r["latency_ms"].get<std::int64_t>();
    if (!rule.digest && !rule.contains && rule.contains_all.empty()) {
      throw Error(ErrorCode::kConfigError, "mock rule needs 'digest' or 'contains'");
    }
    if (!rule.response && !rule.fail_code) {
      throw Error(ErrorCode::kConfigError, "mock rule needs 'response' or 'fail'");
    }
    rules.push_back(std::move(rule));
  }
  std::optional<std::string> def;
  if (doc.contains("default")) def = doc["default"].get<std::string>();
  return ScriptedBackend(std::move(rules), std::move(def), doc.value("latency_ms", std::int64_t{0}));
}

ScriptedBackend ScriptedBackend::from_file(const std::filesystem::path& path) {
  return from_json(read_file(path));
}

void ScriptedBackend::add_rule(Rule rule) {
  std::lock_guard lock(mu_);
  rules_.push_back(std::move(rule));
  fired_.push_back(0);
}

Completion ScriptedBackend::complete(const std::string& system_prompt,
                                     const std::string& user_content) {
  std::unique_lock lock(mu_);
  calls_.push_back({system_prompt, user_content});
  std::string digest;
  for (std::size_t i = 0; i < rules_.size(); ++i) {
    Rule& r = rules_[i];
    if (r.times && fired_[i] >= *r.times) continue;
    bool hit = false;
    if (r.digest) {
      if (digest.empty()) digest = text::sha256_hex(user_content);
      hit = *r.digest == digest;
    } else {
      hit = (!r.contains || text::contains(user_content, *r.contains)) &&
            std::all_of(r.contains_all.begin(), r.contains_all.end(),
                        [&](const std::string& s) { return text::contains(user_content, s); });
    }
    if (!hit) continue;
    ++fired_[i];
    std::int64_t latency = r.latency_ms.value_or(latency_ms_);
    if (r.fail_code) throw BackendError(*r.fail_code, "scripted failure", latency);
    return {*r.response, std::nullopt, std::nullopt, latency};
  }
  if (!default_response_) throw BackendError("no_script", "no scripted response matched", latency_ms_);
  return {*default_response_, std::nullopt, std::nullopt, latency_ms_};
}

std::vector<ScriptedBackend::Call> ScriptedBackend::calls() const {
  std::lock_guard lock(mu_);
  return calls_;
}

std::size_t ScriptedBackend::call_count() const {
  std::lock_guard lock(mu_);
  return calls_.size();
}

JitterBackend::JitterBackend(TextBackend& inner, std::uint64_t seed, std::int64_t max_sleep_us)
    : inner_(inner), state_(seed), max_sleep_us_(std::max<std::int64_t>(max_sleep_us, 1)) {}

Completion JitterBackend::complete(const std::string& system_prompt, const std::string& user_content) {
  std::uint64_t r;
  {
    std::lock_guard lock(mu_);
    r = splitmix64(state_);
  }
  std::this_thread::sleep_for(
      std::chrono::microseconds(static_cast<std::int64_t>(r % static_cast<std::uint64_t>(max_sleep_us_))));
  return inner_.complete(system_prompt, user_content);
}

Completion ContainmentEntailmentBackend::complete(const std::string& /*system_prompt*/,
                                                  const std::string& user_content) {
  auto ai = extract_between_last(user_content, "<ai_content>\n", "\n</ai_content>");
  auto src = extract_between_last(user_content, "<source_chunks>\n", "\n</source_chunks>");
  if (!ai || !src) {
    return {"I could not find the inputs.", std::nullopt, std::nullopt, latency_ms_};
  }
  std::vector<std::string> segments;
  for (const auto& seg : claims::stitch_source_chunks(claims::parse_source_chunks(*src))) {
    segments.push_back(text::normalize_space(seg));
  }
  std::vector<std::string> missing;
  for (const auto& statement : split_statements(*ai)) {
    std::string norm = text::normalize_space(statement);
    bool found = std::any_of(segments.begin(), segments.end(),
                             [&](const std::string& seg) { return text::contains(seg, norm); });
    if (!found) {
      std::string cleaned = statement;
      std::replace(cleaned.begin(), cleaned.end(), '"', '\'');
      missing.push_back(std::move(cleaned));
    }
  }
  json out;
  out["all_relevant_facts_entailed"] = missing.empty();
  if (missing.empty()) {
    out["explanation"] = "Every statement appears in the source chunks.";
  } else {
    std::string expl = "Not supported by the source: ";
    for (std::size_t i = 0; i < missing.size(); ++i) {
      if (i > 0) expl += "; ";
      expl += '"' + missing[i] + '"';
    }
    out["explanation"] = expl + ".";
  }
  return {out.dump(), std::nullopt, std::nullopt, latency_ms_};
}

KeywordClaimClassifier::KeywordClaimClassifier(std::vector<std::string> inaccuracy_markers,
                                               int risk_level_when_any, std::int64_t latency_ms)
    : inaccuracy_markers_(std::move(inaccuracy_markers)),
      risk_level_when_any_(risk_level_when_any),
      latency_ms_(latency_ms) {}

Completion KeywordClaimClassifier::complete(const std::string& /*system_prompt*/,
                                            const std::string& user_content) {
  std::string facts = extract_between_last(user_content, "<non_entailed_facts>\n",
                                           "\n</non_entailed_facts>")
                          .value_or("");
  std::vector<std::string> statements = quoted_segments(facts);
  if (statements.empty() && !text::trim(facts).empty()) statements.emplace_back(text::trim(facts));

  json inaccuracies = json::array();
  json hallucinations = json::array();
  std::set<std::string> seen;
  for (const auto& s : statements) {
    if (!seen.insert(text::normalize_space(s)).second) continue;
    bool inaccurate = std::any_of(inaccuracy_markers_.begin(), inaccuracy_markers_.end(),
                                  [&](const std::string& m) { return text::contains(s, m); });
    (inaccurate ? inaccuracies : hallucinations).push_back(s);
  }
  bool any = !inaccuracies.empty() || !hallucinations.empty();
  json out = {
      {"risk_level", any ? risk_level_when_any_ : 1},
      {"explanation", any ? "Unsupported statements could mislead clinical review."
                          : "No clinically meaningful errors."},
      {"inaccuracies", inaccuracies},
      {"hallucinations", hallucinations},
  };
  return {out.dump(), std::nullopt, std::nullopt, latency_ms_};
}

int RuleLinguisticClassifier::classify_question(std::string_view question) {
  std::string q = text::normalize_space(question);
  auto has = [&](std::initializer_list<std::string_view> cues) {
    return std::any_of(cues.begin(), cues.end(), [&](std::string_view c) { return text::contains(q, c); });
  };
  auto starts = [&](std::initializer_list<std::string_view> cues) {
    return std::any_of(cues.begin(), cues.end(), [&](std::string_view c) { return q.starts_with(c); });
  };
  if (has({"translate", "in spanish", "into spanish", "make it english", "into english",
           "in english", "translation"})) {
    return 5;
  }
  if (has({"summar", "overview", "in short", "brief of", "synopsis"})) return 4;
  if (has({"extract", "list ", "list all", "pull ", "find all", "show me", "get the", "get all"}) ||
      starts({"list", "find", "show", "get"})) {
    return 3;
  }
  if (has({"categorize", "classify", "rate the", "rate this", "label", "score", "severity"})) return 2;
  if (!q.empty() && q.back() == '?') return 1;
  if (starts({"what", "when", "why", "how", "which", "does", "did", "is ", "are ", "was ", "has ",
              "can ", "should "})) {
    return 1;
  }
  return 0;
}

Completion RuleLinguisticClassifier::complete(const std::string& /*system_prompt*/,
                                              const std::string& user_content) {
  auto question = extract_between_last(user_content, "User Question:\n\n```\n", "\n```\n\nYour Response:");
  int n = question ? classify_question(*question) : 0;
  return {fmt::format("{{\"number\": {}}}", n), std::nullopt, std::nullopt, 0};
}

RuleTaskNormalizer::RuleTaskNormalizer()
    : RuleTaskNormalizer(std::vector<Rule>{
          {{"discharge summar"}, "Generate discharge summaries"},
          {{"heart"}, "Review cardiology history"},
          {{"cardiac"}, "Review cardiology history"},
          {{"interact"}, "Check for drug interactions"},
          {{"medication", "cause"}, "Check for drug interactions"},
          {{"insurance", "letter"}, "Draft insurance authorization letters"},
          {{"icu"}, "Summarize the patient's ICU stay"},
          {{"lab", "trend"}, "Track longitudinal lab trends"},
          {{"lab"}, "Interpret lab results and detect abnormalities"},
          {{"differential"}, "Generate differential diagnoses"},
          {{"summar"}, "Summarize patient clinical history"},
          {{"translate"}, "Translate to multiple languages"},
          {{"referral"}, "Process referrals"},
          {{"hospice"}, "Evaluate hospice eligibility"},
      }) {}

RuleTaskNormalizer::RuleTaskNormalizer(std::vector<Rule> rules) : rules_(std::move(rules)) {
  for (auto& line : text::split_lines(prompts::task_catalog())) {
    if (!text::trim(line).empty()) catalog_.push_back(line);
  }
}

std::string RuleTaskNormalizer::normalize_query(std::string_view query) const {
  std::string q = text::normalize_space(query);
  for (const auto& entry : catalog_) {
    if (text::normalize_space(entry) == q) return entry;
  }
  for (const auto& rule : rules_) {
    bool all = std::all_of(rule.all_of.begin(), rule.all_of.end(),
                           [&](const std::string& cue) { return text::contains(q, cue); });
    if (all) return rule.label;
  }
  return "Answer clinical questions about the patient";
}

Completion RuleTaskNormalizer::complete(const std::string& /*system_prompt*/,
                                        const std::string& user_content) {
  auto query = extract_between_last(user_content, "User Query:\n\n", "\n\nYour Response:");
  return {query ? normalize_query(*query) : std::string{}, std::nullopt, std::nullopt, 0};
}

Completion ExtractiveBackend::complete(const std::string& /*system_prompt*/, const std::string& user_content) {
  std::string_view content(user_content);
  std::size_t cut = content.find("\n\nUser: ");
  if (cut != std::string_view::npos) content = content.substr(0, cut);
  std::vector<std::string> picked;
  for (const auto& line : text::split_lines(content)) {
    if (picked.size() >= sentences_) break;
    std::string_view t = text::trim(line);
    if (t.empty() || t.front() == '[') continue;
    if (char last = t.back(); last != '.' && last != '!' && last != '?') continue;
    for (auto& st : split_statements(line)) {
      if (picked.size() >= sentences_) break;
      picked.push_back(std::move(st));
    }
  }
  if (picked.empty()) return {"The record is empty.", std::nullopt, std::nullopt, latency_ms_};
  std::string out = picked[0];
  for (std::size_t i = 1; i < picked.size(); ++i) out += " " + picked[i];
  return {out, std::nullopt, std::nullopt, latency_ms_};
}

}  // namespace clinctx::gateway
