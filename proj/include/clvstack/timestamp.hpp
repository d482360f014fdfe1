#pragma once

#include <charconv>
#include <chrono>
#include <compare>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>

namespace clvstack {

// Calendar timestamp at minute resolution, counted from the Unix epoch (UTC,
// no time zones).
class Timestamp {
 public:
  static constexpr std::int64_t kMinutesPerDay = 24 * 60;

  constexpr Timestamp() = default;
  static constexpr Timestamp from_minutes(std::int64_t minutes) noexcept {
    Timestamp t;
    t.minutes_ = minutes;
    return t;
  }

  static std::optional<Timestamp> from_civil(int year, unsigned month, unsigned day, unsigned hour = 0,
                                             unsigned minute = 0) {
    using namespace std::chrono;
    const year_month_day ymd{std::chrono::year{year}, std::chrono::month{month}, std::chrono::day{day}};
    if (!ymd.ok() || hour > 23 || minute > 59) return std::nullopt;
    const auto days_since_epoch = sys_days{ymd}.time_since_epoch().count();
    return from_minutes(static_cast<std::int64_t>(days_since_epoch) * kMinutesPerDay + hour * 60 + minute);
  }

  constexpr std::int64_t minutes() const noexcept { return minutes_; }

  constexpr Timestamp plus_days(std::int64_t days) const noexcept {
    return from_minutes(minutes_ + days * kMinutesPerDay);
  }
  constexpr Timestamp plus_minutes(std::int64_t m) const noexcept { return from_minutes(minutes_ + m); }

  // Midnight starting this timestamp's calendar day.
  constexpr Timestamp start_of_day() const noexcept {
    std::int64_t d = minutes_ / kMinutesPerDay;
    if (minutes_ % kMinutesPerDay < 0) --d;
    return from_minutes(d * kMinutesPerDay);
  }

  // "YYYY-MM-DD HH:MM"
  std::string to_string() const {
    using namespace std::chrono;
    const auto day_start = start_of_day();
    const year_month_day ymd{sys_days{days{day_start.minutes_ / kMinutesPerDay}}};
    const auto in_day = minutes_ - day_start.minutes_;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u %02lld:%02lld", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                  static_cast<long long>(in_day / 60), static_cast<long long>(in_day % 60));
    return buf;
  }

  constexpr auto operator<=>(const Timestamp&) const = default;

 private:
  std::int64_t minutes_ = 0;
};

// Whole days elapsed from `earlier` to `later`, floored.
constexpr std::int64_t floor_days_between(Timestamp earlier, Timestamp later) noexcept {
  const std::int64_t diff = later.minutes() - earlier.minutes();
  std::int64_t d = diff / Timestamp::kMinutesPerDay;
  if (diff % Timestamp::kMinutesPerDay < 0) --d;
  return d;
}

namespace detail {

struct FieldCursor {
  std::string_view text;
  std::size_t pos = 0;

  std::optional<unsigned> number(std::size_t min_digits, std::size_t max_digits) {
    std::size_t start = pos;
    while (pos < text.size() && pos - start < max_digits && text[pos] >= '0' && text[pos] <= '9') ++pos;
    if (pos - start < min_digits) return std::nullopt;
    unsigned value = 0;
    std::from_chars(text.data() + start, text.data() + pos, value);
    return value;
  }
  bool literal(char c) {
    if (pos < text.size() && text[pos] == c) {
      ++pos;
      return true;
    }
    return false;
  }
  bool at_end() const { return pos == text.size(); }
};

// Optional " HH:MM[:SS]" or "THH:MM[:SS]" tail. Seconds are truncated.
inline bool parse_clock(FieldCursor& cur, unsigned& hour, unsigned& minute) {
  hour = 0;
  minute = 0;
  if (cur.at_end()) return true;
  if (!cur.literal(' ') && !cur.literal('T')) return false;
  auto h = cur.number(1, 2);
  if (!h || !cur.literal(':')) return false;
  auto m = cur.number(2, 2);
  if (!m) return false;
  if (cur.literal(':')) {
    auto s = cur.number(2, 2);
    if (!s || *s > 59) return false;
  }
  hour = *h;
  minute = *m;
  return cur.at_end();
}

}  // namespace detail

// Accepts "DD-MM-YYYY HH:MM" (the retail export format) and ISO-8601
// "YYYY-MM-DD[ T]HH:MM[:SS]" or a bare "YYYY-MM-DD".
inline std::optional<Timestamp> parse_timestamp(std::string_view text) {
  while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
  while (!text.empty() && text.back() == ' ') text.remove_suffix(1);

  detail::FieldCursor cur{text};
  unsigned hour = 0, minute = 0;
  // Day-first form.
  if (auto d = cur.number(1, 2); d && cur.literal('-')) {
    auto m = cur.number(1, 2);
    if (m && cur.literal('-')) {
      auto y = cur.number(4, 4);
      if (y && detail::parse_clock(cur, hour, minute)) return Timestamp::from_civil(static_cast<int>(*y), *m, *d, hour, minute);
    }
    return std::nullopt;
  }
  cur.pos = 0;
  auto y = cur.number(4, 4);
  if (!y || !cur.literal('-')) return std::nullopt;
  auto m = cur.number(1, 2);
  if (!m || !cur.literal('-')) return std::nullopt;
  auto d = cur.number(1, 2);
  if (!d || !detail::parse_clock(cur, hour, minute)) return std::nullopt;
  return Timestamp::from_civil(static_cast<int>(*y), *m, *d, hour, minute);
}

}  // namespace clvstack
