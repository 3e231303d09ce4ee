#pragma once

#include <cmath>
#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace eti {

// Exact decimal payoff stored in thousandths. Table values such as -0.5 stay
// exact through sums, and render with the shortest decimal text ("-0.5", "5").
class Payoff {
 public:
  constexpr Payoff() = default;

  static constexpr Payoff from_milli(std::int64_t milli) noexcept {
    Payoff p;
    p.milli_ = milli;
    return p;
  }
  // Rounds to the nearest thousandth.
  static Payoff from_double(double v) noexcept {
    return from_milli(static_cast<std::int64_t>(std::llround(v * 1000.0)));
  }
  // Parses "-0.5", "5", "12.125". Throws DomainError on anything else.
  static Payoff parse(std::string_view text);

  constexpr std::int64_t milli() const noexcept { return milli_; }
  constexpr double value() const noexcept {
    return static_cast<double>(milli_) / 1000.0;
  }
  std::string to_string() const;

  constexpr Payoff operator+(Payoff o) const noexcept {
    return from_milli(milli_ + o.milli_);
  }
  constexpr Payoff operator-(Payoff o) const noexcept {
    return from_milli(milli_ - o.milli_);
  }
  constexpr Payoff operator-() const noexcept { return from_milli(-milli_); }
  constexpr Payoff& operator+=(Payoff o) noexcept {
    milli_ += o.milli_;
    return *this;
  }
  constexpr auto operator<=>(const Payoff&) const = default;

 private:
  std::int64_t milli_ = 0;
};

namespace payoff_literals {
constexpr Payoff operator""_pay(long double v) {
  return Payoff::from_milli(static_cast<std::int64_t>(
      v * 1000.0L + (v < 0 ? -0.5L : 0.5L)));
}
constexpr Payoff operator""_pay(unsigned long long v) {
  return Payoff::from_milli(static_cast<std::int64_t>(v) * 1000);
}
}  // namespace payoff_literals

}  // namespace eti
