#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace clinctx::text {

// A "character" throughout the platform is a Unicode code point. Counting and
// slicing work on UTF-8 lead bytes, so malformed input degrades to bytes.
std::size_t char_count(std::string_view s);

// Byte offset of every character start plus one trailing entry equal to
// s.size(); entry i is where character i begins.
std::vector<std::size_t> char_offsets(std::string_view s);

bool is_valid_utf8(std::string_view s);

std::string sha256_hex(std::string_view data);

// Standard base64 (RFC 4648) with optional padding and embedded whitespace.
std::optional<std::string> base64_decode(std::string_view encoded);
std::string base64_encode(std::string_view data);

std::string_view trim(std::string_view s);
std::string_view trim_right(std::string_view s);
std::string to_lower(std::string_view s);
// Lowercase, then collapse every whitespace run into one space and trim.
std::string normalize_space(std::string_view s);

bool contains(std::string_view haystack, std::string_view needle);
std::vector<std::string> split_lines(std::string_view s);

// Replaces each `{name}` placeholder in a single left-to-right pass: text that
// came from a substituted value is never scanned again, and every byte of the
// template that is not one of the named placeholders is copied unchanged.
std::string fill_template(std::string_view tmpl,
                          const std::vector<std::pair<std::string, std::string>>& values);

// 20509 -> "20,509".
std::string group_thousands(std::int64_t v);
// 0.8125 -> "81.25%" with `places` fractional digits.
std::string format_percent(double fraction, int places);

}  // namespace clinctx::text
