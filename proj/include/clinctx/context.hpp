#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace clinctx::context {

inline constexpr std::int64_t kDefaultOutputReserve = 8192;
inline constexpr double kFanoutOverlapRatio = 0.10;

enum class CountRule { kCharsDiv, kWhitespaceWords, kExternal };

struct TokenizerSpec {
  std::string name = "chars_div_4";
  CountRule rule = CountRule::kCharsDiv;
  std::int64_t divisor = 4;
  // Only consulted for CountRule::kExternal.
  std::function<std::int64_t(std::string_view)> external;

  static TokenizerSpec chars_div(std::int64_t divisor = 4);
  static TokenizerSpec whitespace_words();
  static TokenizerSpec external_counter(std::string name,
                                        std::function<std::int64_t(std::string_view)> fn);

  std::int64_t count(std::string_view text) const;

  // A character budget that holds at most `tokens` tokens under this rule.
  // Exact for chars_div, a safe bound for whitespace_words and an estimate
  // from `sample` for external counters.
  std::int64_t chars_for_tokens(std::int64_t tokens, std::string_view sample = {}) const;
};

std::int64_t count_tokens(std::string_view text, const TokenizerSpec& spec);

struct Chunk {
  std::size_t index = 0;
  // In characters (code points) from the start of the source text.
  std::size_t offset = 0;
  std::string text;

  bool operator==(const Chunk&) const = default;
};

// Fixed-stride chunking: chunk i starts at i * (size - overlap) characters and
// is at most `size` characters long; the last chunk ends at the text's end.
// Empty text yields no chunks. Throws Error(kInvalidParams) unless
// 0 <= overlap < size.
std::vector<Chunk> chunk_text(std::string_view text, std::size_t size, std::size_t overlap);

struct TokenCounts {
  std::int64_t system = 0;
  std::int64_t query = 0;
  std::int64_t record = 0;
  std::int64_t total = 0;

  bool operator==(const TokenCounts&) const = default;
};

struct ContextPackage {
  std::string system_prompt;
  std::string query;
  std::string record_text;
  TokenCounts token_counts;

  bool operator==(const ContextPackage&) const = default;
};

// Throws Error(kEmptyQuery) on an empty query.
ContextPackage build_context(std::string record_text, std::string query, std::string system_prompt,
                             const TokenizerSpec& tokenizer);

enum class FanoutMode { kSingle, kMapReduce };

std::string_view to_string(FanoutMode mode);

struct PlanChunk {
  std::size_t index = 0;
  std::size_t offset = 0;
  std::string text;
  std::int64_t token_count = 0;
};

struct FanoutPlan {
  FanoutMode mode = FanoutMode::kSingle;
  std::vector<PlanChunk> chunks;
  std::string reduce_instruction;
  std::string model_name;

  // Everything execution needs besides the chunks.
  std::string system_prompt;
  std::string query;
  std::int64_t window_tokens = 0;
  std::int64_t output_reserve = 0;
  std::int64_t capacity_tokens = 0;
  std::size_t chunk_chars = 0;
  std::size_t overlap_chars = 0;
  TokenizerSpec tokenizer;
};

extern const std::string_view kReduceInstruction;

// capacity = window - reserve - system - query. Fits -> one chunk holding the
// whole record. Otherwise ceil(record / capacity) chunks cut by chunk_text
// with a 10% overlap, shrunk where 10% would force an extra chunk.
// Throws Error(kWindowTooSmall) when capacity <= 0.
FanoutPlan plan_fanout(const ContextPackage& pkg, std::int64_t window_tokens,
                       std::int64_t output_reserve, const TokenizerSpec& tokenizer,
                       std::string model_name = {});

// The user message sent for one record slice. A query containing the
// `{record_text}` placeholder receives the slice there; otherwise the slice
// precedes the query, separated by a blank line.
std::string render_user_content(std::string_view query, std::string_view record_slice);

}  // namespace clinctx::context
