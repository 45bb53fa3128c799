#include "clinctx/time.hpp"

#include <fmt/format.h>

#include <cctype>

#include "clinctx/error.hpp"

namespace clinctx {
namespace {

using namespace std::chrono;

bool read_digits(std::string_view s, std::size_t& pos, int count, int& out) {
  if (pos + count > s.size()) return false;
  int v = 0;
  for (int i = 0; i < count; ++i) {
    char c = s[pos + i];
    if (!std::isdigit(static_cast<unsigned char>(c))) return false;
    v = v * 10 + (c - '0');
  }
  pos += count;
  out = v;
  return true;
}

bool expect(std::string_view s, std::size_t& pos, char c) {
  if (pos < s.size() && s[pos] == c) {
    ++pos;
    return true;
  }
  return false;
}

}  // namespace

std::optional<Timestamp> try_parse_timestamp(std::string_view s) {
  std::size_t pos = 0;
  int y = 0, mo = 0, d = 0;
  if (!read_digits(s, pos, 4, y) || !expect(s, pos, '-') || !read_digits(s, pos, 2, mo) ||
      !expect(s, pos, '-') || !read_digits(s, pos, 2, d)) {
    return std::nullopt;
  }
  year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) return std::nullopt;
  milliseconds ms = sys_days{ymd}.time_since_epoch();
  if (pos == s.size()) return Timestamp{ms};

  if (!expect(s, pos, 'T') && !expect(s, pos, ' ')) return std::nullopt;
  int hh = 0, mm = 0, ss = 0, frac = 0;
  if (!read_digits(s, pos, 2, hh) || !expect(s, pos, ':') || !read_digits(s, pos, 2, mm)) {
    return std::nullopt;
  }
  if (expect(s, pos, ':')) {
    if (!read_digits(s, pos, 2, ss)) return std::nullopt;
    if (expect(s, pos, '.')) {
      int digits = 0;
      while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) {
        if (digits < 3) frac = frac * 10 + (s[pos] - '0');
        ++digits;
        ++pos;
      }
      if (digits == 0) return std::nullopt;
      for (int i = digits; i < 3; ++i) frac *= 10;
    }
  }
  if (hh > 23 || mm > 59 || ss > 60) return std::nullopt;
  ms += hours{hh} + minutes{mm} + seconds{ss} + milliseconds{frac};

  if (pos == s.size() || expect(s, pos, 'Z')) {
    return pos == s.size() ? std::optional<Timestamp>(Timestamp{ms}) : std::nullopt;
  }
  char sign = s[pos];
  if (sign != '+' && sign != '-') return std::nullopt;
  ++pos;
  int oh = 0, om = 0;
  if (!read_digits(s, pos, 2, oh)) return std::nullopt;
  expect(s, pos, ':');
  if (!read_digits(s, pos, 2, om) || pos != s.size()) return std::nullopt;
  milliseconds offset = hours{oh} + minutes{om};
  ms += sign == '+' ? -offset : offset;
  return Timestamp{ms};
}

Timestamp parse_timestamp(std::string_view text) {
  auto ts = try_parse_timestamp(text);
  if (!ts) throw Error(ErrorCode::kInvalidParams, fmt::format("unparseable timestamp '{}'", text));
  return *ts;
}

std::string format_timestamp(Timestamp ts) {
  auto day_point = floor<days>(ts);
  year_month_day ymd{day_point};
  hh_mm_ss<milliseconds> tod{ts - day_point};
  std::string out = fmt::format("{:04}-{:02}-{:02}T{:02}:{:02}:{:02}", int(ymd.year()),
                                unsigned(ymd.month()), unsigned(ymd.day()), tod.hours().count(),
                                tod.minutes().count(), tod.seconds().count());
  if (tod.subseconds().count() != 0) out += fmt::format(".{:03}", tod.subseconds().count());
  out += 'Z';
  return out;
}

std::string format_date(Timestamp ts) {
  year_month_day ymd{floor<days>(ts)};
  return fmt::format("{:04}-{:02}-{:02}", int(ymd.year()), unsigned(ymd.month()),
                     unsigned(ymd.day()));
}

std::string iso_week(Timestamp ts) {
  sys_days day_point = floor<days>(ts);
  // The ISO year is the year of this week's Thursday.
  unsigned iso_dow = weekday{day_point}.iso_encoding();
  sys_days thursday = day_point + days{4 - static_cast<int>(iso_dow)};
  year iso_year = year_month_day{thursday}.year();
  sys_days jan1{iso_year / January / 1};
  int week = static_cast<int>((thursday - jan1).count() / 7) + 1;
  return fmt::format("{:04}-W{:02}", int(iso_year), week);
}

Timestamp from_unix_ms(std::int64_t ms) { return Timestamp{milliseconds{ms}}; }

std::int64_t to_unix_ms(Timestamp ts) { return ts.time_since_epoch().count(); }

Timestamp SystemClock::now() { return floor<milliseconds>(system_clock::now()); }

}  // namespace clinctx
