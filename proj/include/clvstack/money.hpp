#pragma once

#include <charconv>
#include <compare>
#include <cstdint>
#include <cstdlib>
#include <optional>
#include <string>
#include <string_view>

#include "clvstack/core.hpp"

namespace clvstack {

// Exact decimal currency amount stored as a count of millionths.
class Money {
 public:
  static constexpr std::int64_t kScale = 1'000'000;
  static constexpr int kDigits = 6;

  constexpr Money() = default;

  static constexpr Money from_micros(std::int64_t micros) noexcept {
    Money m;
    m.micros_ = micros;
    return m;
  }
  static constexpr Money from_units(std::int64_t units) noexcept { return from_micros(units * kScale); }

  // Parses "[-+]digits[.digits]". Digits beyond the sixth decimal place are
  // rounded half away from zero. Exponents are rejected.
  static std::optional<Money> parse(std::string_view text) {
    while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
    while (!text.empty() && text.back() == ' ') text.remove_suffix(1);
    if (text.empty()) return std::nullopt;
    bool negative = false;
    if (text.front() == '-' || text.front() == '+') {
      negative = text.front() == '-';
      text.remove_prefix(1);
    }
    const auto dot = text.find('.');
    const std::string_view whole = text.substr(0, dot);
    const std::string_view frac = dot == std::string_view::npos ? std::string_view{} : text.substr(dot + 1);
    if (whole.empty() && frac.empty()) return std::nullopt;
    auto digits_only = [](std::string_view s) {
      for (char c : s)
        if (c < '0' || c > '9') return false;
      return true;
    };
    if (!digits_only(whole) || !digits_only(frac)) return std::nullopt;
    if (whole.size() > 12) return std::nullopt;

    std::int64_t units = 0;
    for (char c : whole) units = units * 10 + (c - '0');
    std::int64_t micros = 0;
    for (int i = 0; i < kDigits; ++i) {
      micros = micros * 10 + (static_cast<std::size_t>(i) < frac.size() ? frac[static_cast<std::size_t>(i)] - '0' : 0);
    }
    if (frac.size() > static_cast<std::size_t>(kDigits) && frac[kDigits] >= '5') ++micros;
    std::int64_t total = units * kScale + micros;
    return from_micros(negative ? -total : total);
  }

  constexpr std::int64_t micros() const noexcept { return micros_; }
  double to_double() const noexcept { return static_cast<double>(micros_) / static_cast<double>(kScale); }

  // Shortest decimal rendering with at least two fractional digits: 83.4 -> "83.40".
  std::string to_string() const {
    const std::int64_t abs = micros_ < 0 ? -micros_ : micros_;
    std::string frac = std::to_string(abs % kScale);
    frac.insert(0, static_cast<std::size_t>(kDigits) - frac.size(), '0');
    while (frac.size() > 2 && frac.back() == '0') frac.pop_back();
    return (micros_ < 0 ? "-" : "") + std::to_string(abs / kScale) + "." + frac;
  }

  // Exact product with an integer quantity; throws on overflow.
  Money times(std::int64_t quantity) const {
    std::int64_t out;
    if (__builtin_mul_overflow(micros_, quantity, &out)) throw InputError("currency overflow in quantity x price");
    return from_micros(out);
  }

  Money& operator+=(Money other) {
    if (__builtin_add_overflow(micros_, other.micros_, &micros_)) throw InputError("currency overflow in sum");
    return *this;
  }
  friend Money operator+(Money a, Money b) { return a += b; }

  constexpr auto operator<=>(const Money&) const = default;

 private:
  std::int64_t micros_ = 0;
};

}  // namespace clvstack
