#include "clinctx/decimal.hpp"

#include <fmt/format.h>

#include <cmath>
#include <limits>

#include "clinctx/error.hpp"

namespace clinctx {

std::int64_t div_round_half_up(__int128 num, __int128 den) {
  if (den == 0) throw Error(ErrorCode::kInvalidParams, "decimal division by zero");
  bool negative = (num < 0) != (den < 0);
  __int128 a = num < 0 ? -num : num;
  __int128 b = den < 0 ? -den : den;
  __int128 q = a / b;
  __int128 r = a % b;
  if (r * 2 >= b) ++q;
  if (q > std::numeric_limits<std::int64_t>::max()) {
    throw Error(ErrorCode::kInvalidParams, "decimal overflow");
  }
  return static_cast<std::int64_t>(negative ? -q : q);
}

Decimal Decimal::parse(std::string_view text) {
  std::size_t pos = 0;
  bool negative = false;
  if (pos < text.size() && (text[pos] == '-' || text[pos] == '+')) {
    negative = text[pos] == '-';
    ++pos;
  }
  __int128 whole = 0;
  __int128 frac = 0;
  __int128 frac_scale = 1;
  bool any_digit = false;
  bool seen_point = false;
  for (; pos < text.size(); ++pos) {
    char c = text[pos];
    if (c == '.' && !seen_point) {
      seen_point = true;
      continue;
    }
    if (c < '0' || c > '9') {
      throw Error(ErrorCode::kInvalidParams, fmt::format("not a decimal: '{}'", text));
    }
    any_digit = true;
    if (!seen_point) {
      whole = whole * 10 + (c - '0');
      if (whole > std::numeric_limits<std::int64_t>::max() / kOne) {
        throw Error(ErrorCode::kInvalidParams, "decimal overflow");
      }
    } else if (frac_scale < static_cast<__int128>(1'000'000'000'000'000'000LL)) {
      frac = frac * 10 + (c - '0');
      frac_scale *= 10;
    }
  }
  if (!any_digit) throw Error(ErrorCode::kInvalidParams, fmt::format("not a decimal: '{}'", text));
  std::int64_t frac_raw = div_round_half_up(frac * kOne, frac_scale);
  std::int64_t raw = static_cast<std::int64_t>(whole * kOne) + frac_raw;
  return from_raw(negative ? -raw : raw);
}

Decimal Decimal::from_double(double v) {
  if (!std::isfinite(v)) throw Error(ErrorCode::kInvalidParams, "non-finite decimal");
  // Route through the shortest decimal rendering so 0.1 becomes exactly 0.1.
  std::string shortest = fmt::format("{}", v);
  return parse(shortest.find('e') == std::string::npos ? shortest : fmt::format("{:.6f}", v));
}

Decimal Decimal::operator*(Decimal o) const {
  return from_raw(div_round_half_up(static_cast<__int128>(raw_) * o.raw_, kOne));
}

Decimal Decimal::operator/(Decimal o) const {
  return from_raw(div_round_half_up(static_cast<__int128>(raw_) * kOne, o.raw_));
}

Decimal Decimal::round_to(int places) const {
  if (places >= kScale) return *this;
  std::int64_t unit = 1;
  for (int i = places; i < kScale; ++i) unit *= 10;
  return from_raw(div_round_half_up(raw_, unit) * unit);
}

std::string Decimal::to_string(int places) const {
  Decimal r = round_to(places);
  std::int64_t v = r.raw_ < 0 ? -r.raw_ : r.raw_;
  std::string out = r.raw_ < 0 ? "-" : "";
  out += std::to_string(v / kOne);
  if (places > 0) {
    std::string frac = fmt::format("{:06}", v % kOne);
    out += '.';
    out += frac.substr(0, static_cast<std::size_t>(std::min(places, kScale)));
  }
  return out;
}

std::string Decimal::to_grouped(int places) const {
  std::string plain = to_string(places);
  std::size_t start = plain[0] == '-' ? 1 : 0;
  std::size_t end = plain.find('.');
  if (end == std::string::npos) end = plain.size();
  std::string grouped = plain.substr(0, start);
  std::string digits = plain.substr(start, end - start);
  for (std::size_t i = 0; i < digits.size(); ++i) {
    if (i > 0 && (digits.size() - i) % 3 == 0) grouped += ',';
    grouped += digits[i];
  }
  return grouped + plain.substr(end);
}

std::string Decimal::to_canonical() const {
  std::string s = to_string(kScale);
  while (s.back() == '0') s.pop_back();
  if (s.back() == '.') s.pop_back();
  return s;
}

}  // namespace clinctx
