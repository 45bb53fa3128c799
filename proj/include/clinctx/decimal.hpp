#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace clinctx {

// Fixed-point decimal with six fractional digits. Used for every currency and
// price so cost and value arithmetic never drifts the way binary floats do.
// Rounding is half-up (half away from zero) wherever digits are dropped.
class Decimal {
 public:
  static constexpr int kScale = 6;
  static constexpr std::int64_t kOne = 1'000'000;

  constexpr Decimal() = default;

  static constexpr Decimal from_raw(std::int64_t raw) {
    Decimal d;
    d.raw_ = raw;
    return d;
  }
  static constexpr Decimal from_int(std::int64_t v) { return from_raw(v * kOne); }

  // Throws Error(kInvalidParams) on anything but an optional sign, digits and
  // at most one decimal point. Digits past the sixth place are rounded.
  static Decimal parse(std::string_view text);
  // Nearest representable value; only for inputs that arrive as doubles (JSON).
  static Decimal from_double(double v);

  constexpr std::int64_t raw() const { return raw_; }
  double to_double() const { return static_cast<double>(raw_) / kOne; }

  Decimal operator+(Decimal o) const { return from_raw(raw_ + o.raw_); }
  Decimal operator-(Decimal o) const { return from_raw(raw_ - o.raw_); }
  Decimal operator-() const { return from_raw(-raw_); }
  Decimal& operator+=(Decimal o) {
    raw_ += o.raw_;
    return *this;
  }
  Decimal operator*(Decimal o) const;
  Decimal operator/(Decimal o) const;

  Decimal round_to(int places) const;

  // Plain rendering with exactly `places` fractional digits (after rounding).
  std::string to_string(int places = kScale) const;
  // Same, with `,` thousands separators in the integer part.
  std::string to_grouped(int places) const;
  // Shortest rendering that round-trips: trailing fractional zeros removed.
  std::string to_canonical() const;

  friend constexpr auto operator<=>(Decimal, Decimal) = default;

 private:
  std::int64_t raw_ = 0;
};

// Half-up division of a 128-bit numerator; shared by the decimal ops and by
// callers that accumulate wide products before dividing once.
std::int64_t div_round_half_up(__int128 numerator, __int128 denominator);

}  // namespace clinctx
