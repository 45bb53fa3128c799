#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace clinctx {

using Timestamp = std::chrono::sys_time<std::chrono::milliseconds>;

// Accepts `YYYY-MM-DD` and `YYYY-MM-DDThh:mm[:ss[.fff]][Z|+hh:mm|-hh:mm]`.
// A missing offset is read as UTC. Returns nullopt on any syntax error.
std::optional<Timestamp> try_parse_timestamp(std::string_view text);

// Throws Error(kInvalidParams) when the text does not parse.
Timestamp parse_timestamp(std::string_view text);

// `YYYY-MM-DDThh:mm:ssZ`, with `.fff` only when the milliseconds are non-zero.
std::string format_timestamp(Timestamp ts);
std::string format_date(Timestamp ts);

// ISO-8601 week label in UTC, e.g. `2025-W37`.
std::string iso_week(Timestamp ts);

Timestamp from_unix_ms(std::int64_t ms);
std::int64_t to_unix_ms(Timestamp ts);

class Clock {
 public:
  virtual ~Clock() = default;
  virtual Timestamp now() = 0;
};

class SystemClock final : public Clock {
 public:
  Timestamp now() override;
};

// Only moves when told to. Tests and the CLI use it so every run produces
// identical timestamps and latencies.
class ManualClock final : public Clock {
 public:
  explicit ManualClock(Timestamp start) : now_ms_(to_unix_ms(start)) {}

  Timestamp now() override { return from_unix_ms(now_ms_.load()); }
  void advance(std::chrono::milliseconds step) { now_ms_ += step.count(); }
  void set(Timestamp ts) { now_ms_ = to_unix_ms(ts); }

 private:
  std::atomic<std::int64_t> now_ms_;
};

}  // namespace clinctx
