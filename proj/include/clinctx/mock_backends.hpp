#pragma once

#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "clinctx/backend.hpp"

// Deterministic backends used by tests, samples and offline CLI runs.
namespace clinctx::gateway {

// Answers from an ordered rule list. A rule matches on the SHA-256 digest of
// the user content or on substrings of it; it either responds or fails. A
// failing rule with `times` set fails that many matching calls and then
// stops matching. Unmatched calls get `default_response`, or fail with
// "no_script" when there is none.
class ScriptedBackend final : public TextBackend {
 public:
  struct Rule {
    std::optional<std::string> digest;
    std::optional<std::string> contains;
    std::vector<std::string> contains_all;  // every one must appear
    std::optional<std::string> response;
    std::optional<std::string> fail_code;
    std::optional<int> times;
    std::optional<std::int64_t> latency_ms;
  };

  struct Call {
    std::string system_prompt;
    std::string user_content;
  };

  ScriptedBackend() = default;
  ScriptedBackend(std::vector<Rule> rules, std::optional<std::string> default_response,
                  std::int64_t latency_ms = 0);

  // Fixture format:
  // {"default": "...", "latency_ms": 900,
  //  "rules": [{"digest"|"contains": "..." | ["...", ...], "response": "..." | "fail": "code",
  //             "times": 2, "latency_ms": 1500}, ...]}
  static ScriptedBackend from_json(const std::string& json_text);
  static ScriptedBackend from_file(const std::filesystem::path& path);

  void add_rule(Rule rule);
  Completion complete(const std::string& system_prompt, const std::string& user_content) override;

  std::vector<Call> calls() const;
  std::size_t call_count() const;

 private:
  mutable std::mutex mu_;
  std::vector<Rule> rules_;
  std::vector<int> fired_;
  std::optional<std::string> default_response_;
  std::int64_t latency_ms_ = 0;
  std::vector<Call> calls_;
};

// Wraps another backend and sleeps a seeded pseudo-random time before each
// call so that concurrent requests finish in a scrambled order.
class JitterBackend final : public TextBackend {
 public:
  JitterBackend(TextBackend& inner, std::uint64_t seed, std::int64_t max_sleep_us = 2000);
  Completion complete(const std::string& system_prompt, const std::string& user_content) override;

 private:
  TextBackend& inner_;
  std::mutex mu_;
  std::uint64_t state_;
  std::int64_t max_sleep_us_;
};

// Entailment adjudicator for the entailment prompt. Splits the AI content
// into sentences and calls a sentence entailed when it appears verbatim
// (case- and whitespace-insensitive) in the stitched source chunks.
class ContainmentEntailmentBackend final : public TextBackend {
 public:
  explicit ContainmentEntailmentBackend(std::int64_t latency_ms = 0) : latency_ms_(latency_ms) {}
  Completion complete(const std::string& system_prompt, const std::string& user_content) override;

 private:
  std::int64_t latency_ms_;
};

// Claim classifier for the classification prompt. Each quoted statement in
// the non-entailed facts becomes one claim; a statement containing one of the
// `inaccuracy_markers` is an inaccuracy, anything else a hallucination.
class KeywordClaimClassifier final : public TextBackend {
 public:
  KeywordClaimClassifier(std::vector<std::string> inaccuracy_markers, int risk_level_when_any = 3,
                         std::int64_t latency_ms = 0);
  Completion complete(const std::string& system_prompt, const std::string& user_content) override;

 private:
  std::vector<std::string> inaccuracy_markers_;
  int risk_level_when_any_;
  std::int64_t latency_ms_;
};

// Linguistic task classifier for the five-way prompt, keyed on the task
// definitions' phrasing cues. Replies {"number": n}.
class RuleLinguisticClassifier final : public TextBackend {
 public:
  Completion complete(const std::string& system_prompt, const std::string& user_content) override;
  static int classify_question(std::string_view question);
};

// Medical-intent normalizer for the normalization prompt: catalog entries
// pass through byte-exact, keyword rules map common phrasings, anything
// else gets a generic generated label.
class RuleTaskNormalizer final : public TextBackend {
 public:
  struct Rule {
    std::vector<std::string> all_of;  // lowercase substrings
    std::string label;
  };
  RuleTaskNormalizer();
  explicit RuleTaskNormalizer(std::vector<Rule> rules);
  Completion complete(const std::string& system_prompt, const std::string& user_content) override;
  std::string normalize_query(std::string_view query) const;

 private:
  std::vector<Rule> rules_;
  std::vector<std::string> catalog_;
};

// Chat stand-in that answers with the first `sentences` sentences of the
// record portion of the request (the text before the first "\n\nUser: "),
// reading only prose lines: not a bracketed header, ending in . ! or ?.
// Replies are verbatim record text.
class ExtractiveBackend final : public TextBackend {
 public:
  explicit ExtractiveBackend(std::size_t sentences = 2, std::int64_t latency_ms = 1200)
      : sentences_(sentences), latency_ms_(latency_ms) {}
  Completion complete(const std::string& system_prompt, const std::string& user_content) override;

 private:
  std::size_t sentences_;
  std::int64_t latency_ms_;
};

// Pulls the text between the last `open` marker and the following `close`.
std::optional<std::string> extract_between_last(std::string_view haystack, std::string_view open,
                                                std::string_view close);

}  // namespace clinctx::gateway
