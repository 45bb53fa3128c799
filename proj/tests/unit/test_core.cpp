#include <doctest.h>

#include <random>

#include "clinctx/decimal.hpp"
#include "clinctx/error.hpp"
#include "clinctx/text.hpp"
#include "clinctx/time.hpp"

using namespace clinctx;

TEST_CASE("char counting works on code points") {
  CHECK(text::char_count("") == 0);
  CHECK(text::char_count("abc") == 3);
  CHECK(text::char_count("caf\xC3\xA9") == 4);
  CHECK(text::char_count("\xF0\x9F\x98\x80x") == 2);
  auto offs = text::char_offsets("a\xC3\xA9z");
  CHECK(offs == std::vector<std::size_t>{0, 1, 3, 4});
}

TEST_CASE("utf8 validation") {
  CHECK(text::is_valid_utf8("plain"));
  CHECK(text::is_valid_utf8("\xE2\x82\xAC"));
  CHECK_FALSE(text::is_valid_utf8("\xC3"));
  CHECK_FALSE(text::is_valid_utf8("\xFF"));
}

TEST_CASE("sha256 of known vectors") {
  CHECK(text::sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(text::sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("base64 round trip and RFC 4648 vectors") {
  CHECK(text::base64_encode("") == "");
  CHECK(text::base64_encode("f") == "Zg==");
  CHECK(text::base64_encode("foobar") == "Zm9vYmFy");
  CHECK(text::base64_decode("Zm9vYg==") == std::optional<std::string>("foob"));
  CHECK(text::base64_decode("Zm9v\nYmFy") == std::optional<std::string>("foobar"));
  CHECK_FALSE(text::base64_decode("Zm9v!").has_value());
  std::mt19937_64 rng(5);
  for (int i = 0; i < 200; ++i) {
    std::string s(rng() % 300, '\0');
    for (auto& c : s) c = static_cast<char>(rng());
    CHECK(text::base64_decode(text::base64_encode(s)) == std::optional<std::string>(s));
  }
}

TEST_CASE("whitespace helpers") {
  CHECK(text::trim("  a b \n") == "a b");
  CHECK(text::normalize_space("  Foo\t\tBAR \n baz ") == "foo bar baz");
  CHECK(text::split_lines("a\nb\r\nc") == std::vector<std::string>{"a", "b", "c"});
}

TEST_CASE("fill_template substitutes once and leaves other bytes") {
  CHECK(text::fill_template("x {a} y {b} {c}", {{"a", "{b}"}, {"b", "2"}}) == "x {b} y 2 {c}");
  CHECK(text::fill_template("{a}{a}", {{"a", "z"}}) == "zz");
}

TEST_CASE("number formatting") {
  CHECK(text::group_thousands(20509) == "20,509");
  CHECK(text::group_thousands(-1234567) == "-1,234,567");
  CHECK(text::group_thousands(999) == "999");
  CHECK(text::format_percent(0.8125, 2) == "81.25%");
  CHECK(text::format_percent(0.95, 1) == "95.0%");
}

TEST_CASE("decimal parsing and rendering") {
  CHECK(Decimal::parse("1.5").raw() == 1'500'000);
  CHECK(Decimal::parse("-0.0000005").raw() == -1);
  CHECK(Decimal::parse("0.0000005").raw() == 1);
  CHECK(Decimal::parse("12").to_canonical() == "12");
  CHECK(Decimal::parse("12.340").to_canonical() == "12.34");
  CHECK(Decimal::parse("2190000").to_grouped(2) == "2,190,000.00");
  CHECK_THROWS_AS(Decimal::parse("1.2.3"), Error);
  CHECK_THROWS_AS(Decimal::parse("abc"), Error);
}

TEST_CASE("decimal arithmetic rounds half up") {
  auto a = Decimal::parse("2");
  auto b = Decimal::parse("3");
  CHECK((a / b).to_string() == "0.666667");
  CHECK((-a / b).to_string() == "-0.666667");
  CHECK((Decimal::parse("0.000001") * Decimal::parse("0.5")).raw() == 1);
  CHECK(Decimal::parse("1.005").round_to(2).to_string(2) == "1.01");
  CHECK(Decimal::parse("-1.005").round_to(2).to_string(2) == "-1.01");
}

TEST_CASE("decimal multiplication matches an integer oracle") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 2000; ++i) {
    std::int64_t x = static_cast<std::int64_t>(rng() % 2'000'000'000) - 1'000'000'000;
    std::int64_t y = static_cast<std::int64_t>(rng() % 2'000'000'000) - 1'000'000'000;
    __int128 prod = static_cast<__int128>(x) * y;
    // Half away from zero at 1e6.
    __int128 q = prod / 1'000'000, r = prod % 1'000'000;
    if (r < 0) r = -r;
    if (r * 2 >= 1'000'000) q += prod < 0 ? -1 : 1;
    CHECK((Decimal::from_raw(x) * Decimal::from_raw(y)).raw() == static_cast<std::int64_t>(q));
  }
}

TEST_CASE("timestamps parse and format") {
  auto t = parse_timestamp("2025-09-08T08:00:00Z");
  CHECK(format_timestamp(t) == "2025-09-08T08:00:00Z");
  CHECK(format_timestamp(parse_timestamp("2025-09-08")) == "2025-09-08T00:00:00Z");
  CHECK(format_timestamp(parse_timestamp("2025-09-08T10:00:00+02:00")) == "2025-09-08T08:00:00Z");
  CHECK(format_timestamp(parse_timestamp("2025-09-08T08:00:00.250Z")) == "2025-09-08T08:00:00.250Z");
  CHECK_FALSE(try_parse_timestamp("2025-13-01").has_value());
  CHECK_FALSE(try_parse_timestamp("2025-02-30").has_value());
  CHECK_FALSE(try_parse_timestamp("yesterday").has_value());
  CHECK(format_date(t) == "2025-09-08");
}

TEST_CASE("iso weeks") {
  CHECK(iso_week(parse_timestamp("2025-09-08")) == "2025-W37");
  CHECK(iso_week(parse_timestamp("2021-01-03")) == "2020-W53");
  CHECK(iso_week(parse_timestamp("2024-12-30")) == "2025-W01");
}

TEST_CASE("manual clock only moves when told") {
  ManualClock c(parse_timestamp("2025-01-01"));
  auto t0 = c.now();
  CHECK(c.now() == t0);
  c.advance(std::chrono::milliseconds(1500));
  CHECK(to_unix_ms(c.now()) - to_unix_ms(t0) == 1500);
}

TEST_CASE("errors carry code and detail") {
  Error e(ErrorCode::kUnknownSession, "s-1");
  CHECK(e.code() == ErrorCode::kUnknownSession);
  CHECK(e.detail() == "s-1");
  CHECK(std::string(e.what()) == "UnknownSession: s-1");
}
