#include "clinctx/context.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>

#include "clinctx/error.hpp"
#include "clinctx/text.hpp"

namespace clinctx::context {

const std::string_view kReduceInstruction =
    "The record for this patient was too long to read at once, so it was split into "
    "consecutive segments and the request below was answered separately for each segment. "
    "The partial answers follow in record order. Combine them into one answer to the request. "
    "Keep every supported fact, remove repetition, and do not add information that none of "
    "the partial answers contains.";

namespace {

std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return a <= 0 ? 0 : (a + b - 1) / b; }

}  // namespace

TokenizerSpec TokenizerSpec::chars_div(std::int64_t divisor) {
  if (divisor <= 0) throw Error(ErrorCode::kInvalidParams, "tokenizer divisor must be positive");
  TokenizerSpec spec;
  spec.name = fmt::format("chars_div_{}", divisor);
  spec.rule = CountRule::kCharsDiv;
  spec.divisor = divisor;
  return spec;
}

TokenizerSpec TokenizerSpec::whitespace_words() {
  TokenizerSpec spec;
  spec.name = "whitespace_words";
  spec.rule = CountRule::kWhitespaceWords;
  return spec;
}

TokenizerSpec TokenizerSpec::external_counter(std::string name,
                                              std::function<std::int64_t(std::string_view)> fn) {
  TokenizerSpec spec;
  spec.name = std::move(name);
  spec.rule = CountRule::kExternal;
  spec.external = std::move(fn);
  return spec;
}

std::int64_t TokenizerSpec::count(std::string_view s) const {
  switch (rule) {
    case CountRule::kCharsDiv:
      return ceil_div(static_cast<std::int64_t>(text::char_count(s)), divisor);
    case CountRule::kWhitespaceWords: {
      std::int64_t words = 0;
      bool in_word = false;
      for (char c : s) {
        bool space = std::isspace(static_cast<unsigned char>(c)) != 0;
        if (!space && !in_word) ++words;
        in_word = !space;
      }
      return words;
    }
    case CountRule::kExternal:
      if (!external) throw Error(ErrorCode::kConfigError, "external tokenizer has no counter");
      return external(s);
  }
  return 0;
}

std::int64_t TokenizerSpec::chars_for_tokens(std::int64_t tokens, std::string_view sample) const {
  switch (rule) {
    case CountRule::kCharsDiv:
      return tokens * divisor;
    case CountRule::kWhitespaceWords:
      // A word needs one character plus a separator, so n chars hold <= n words.
      return tokens;
    case CountRule::kExternal: {
      std::int64_t sample_tokens = count(sample);
      if (sample_tokens <= 0) return tokens;
      auto chars = static_cast<std::int64_t>(text::char_count(sample));
      return std::max<std::int64_t>(1, tokens * chars / sample_tokens);
    }
  }
  return tokens;
}

std::int64_t count_tokens(std::string_view text, const TokenizerSpec& spec) {
  return spec.count(text);
}

std::vector<Chunk> chunk_text(std::string_view s, std::size_t size, std::size_t overlap) {
  if (size == 0 || overlap >= size) {
    throw Error(ErrorCode::kInvalidParams,
                fmt::format("chunk size {} / overlap {} violates 0 <= overlap < size", size, overlap));
  }
  std::vector<Chunk> chunks;
  std::vector<std::size_t> offsets = text::char_offsets(s);
  std::size_t length = offsets.size() - 1;
  std::size_t stride = size - overlap;
  for (std::size_t start = 0, index = 0; start < length; start += stride, ++index) {
    std::size_t end = std::min(start + size, length);
    chunks.push_back({index, start, std::string(s.substr(offsets[start], offsets[end] - offsets[start]))});
    if (end == length) break;
  }
  return chunks;
}

ContextPackage build_context(std::string record_text, std::string query, std::string system_prompt,
                             const TokenizerSpec& tokenizer) {
  if (query.empty()) throw Error(ErrorCode::kEmptyQuery, "query is empty");
  ContextPackage pkg;
  pkg.token_counts.system = tokenizer.count(system_prompt);
  pkg.token_counts.query = tokenizer.count(query);
  pkg.token_counts.record = tokenizer.count(record_text);
  pkg.token_counts.total = pkg.token_counts.system + pkg.token_counts.query + pkg.token_counts.record;
  pkg.system_prompt = std::move(system_prompt);
  pkg.query = std::move(query);
  pkg.record_text = std::move(record_text);
  return pkg;
}

std::string_view to_string(FanoutMode mode) {
  return mode == FanoutMode::kSingle ? "single" : "map_reduce";
}

FanoutPlan plan_fanout(const ContextPackage& pkg, std::int64_t window_tokens,
                       std::int64_t output_reserve, const TokenizerSpec& tokenizer,
                       std::string model_name) {
  const TokenCounts& tc = pkg.token_counts;
  std::int64_t capacity = window_tokens - output_reserve - tc.system - tc.query;
  if (capacity <= 0) {
    throw Error(ErrorCode::kWindowTooSmall,
                fmt::format("window {} leaves no room after reserve {} + system {} + query {}",
                            window_tokens, output_reserve, tc.system, tc.query));
  }
  FanoutPlan plan;
  plan.model_name = std::move(model_name);
  plan.system_prompt = pkg.system_prompt;
  plan.query = pkg.query;
  plan.window_tokens = window_tokens;
  plan.output_reserve = output_reserve;
  plan.capacity_tokens = capacity;
  plan.tokenizer = tokenizer;

  if (tc.record <= capacity) {
    plan.mode = FanoutMode::kSingle;
    plan.chunks.push_back({0, 0, pkg.record_text, tc.record});
    plan.chunk_chars = text::char_count(pkg.record_text);
    return plan;
  }

  plan.mode = FanoutMode::kMapReduce;
  plan.reduce_instruction = std::string(kReduceInstruction);
  const auto length = static_cast<std::int64_t>(text::char_count(pkg.record_text));
  const std::int64_t target = ceil_div(tc.record, capacity);
  std::int64_t size = std::min(length, tokenizer.chars_for_tokens(capacity, pkg.record_text));
  while (true) {
    size = std::max<std::int64_t>(size, 1);
    std::int64_t overlap = static_cast<std::int64_t>(static_cast<double>(size) * kFanoutOverlapRatio);
    if (target > 1) {
      // Largest overlap that still covers the record in `target` chunks.
      std::int64_t min_stride = ceil_div(length - size, target - 1);
      overlap = std::min(overlap, size - min_stride);
    }
    overlap = std::clamp<std::int64_t>(overlap, 0, size - 1);
    auto pieces = chunk_text(pkg.record_text, static_cast<std::size_t>(size),
                             static_cast<std::size_t>(overlap));
    std::vector<PlanChunk> planned;
    bool fits = true;
    for (auto& c : pieces) {
      std::int64_t tokens = tokenizer.count(c.text);
      if (tokens > capacity) {
        fits = false;
        break;
      }
      planned.push_back({c.index, c.offset, std::move(c.text), tokens});
    }
    if (fits) {
      plan.chunks = std::move(planned);
      plan.chunk_chars = static_cast<std::size_t>(size);
      plan.overlap_chars = static_cast<std::size_t>(overlap);
      return plan;
    }
    if (size == 1) {
      throw Error(ErrorCode::kWindowTooSmall, "a single character exceeds the chunk capacity");
    }
    size = size * 9 / 10;
  }
}

std::string render_user_content(std::string_view query, std::string_view record_slice) {
  if (text::contains(query, "{record_text}")) {
    return text::fill_template(query, {{"record_text", std::string(record_slice)}});
  }
  if (record_slice.empty()) return std::string(query);
  std::string out;
  out.reserve(record_slice.size() + query.size() + 2);
  out += record_slice;
  out += "\n\n";
  out += query;
  return out;
}

}  // namespace clinctx::context
