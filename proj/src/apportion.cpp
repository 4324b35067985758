#include "noiseforge/apportion.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <string_view>
#include <cmath>
#include <numeric>

#include "noiseforge/common.hpp"

namespace noiseforge {

using boost::multiprecision::cpp_int;

std::vector<std::int64_t> apportion(std::int64_t total, std::span<const Rational> weights,
                                    TieBreak tie) {
  if (total < 0) throw ConfigError("cannot apportion a negative total");
  Rational sum = 0;
  for (const auto& w : weights) {
    if (w < 0) throw ConfigError("apportionment weights must be non-negative");
    sum += w;
  }
  std::vector<std::int64_t> shares(weights.size(), 0);
  if (total == 0) return shares;
  if (sum == 0) throw ConfigError("cannot apportion a positive total over zero weights");

  std::vector<Rational> remainder(weights.size());
  std::int64_t assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const Rational quota = weights[i] * total / sum;
    const cpp_int whole = numerator(quota) / denominator(quota);
    shares[i] = static_cast<std::int64_t>(whole);
    remainder[i] = quota - Rational(whole);
    assigned += shares[i];
  }

  std::vector<std::size_t> order(weights.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (remainder[a] != remainder[b]) return remainder[a] > remainder[b];
    return tie == TieBreak::lowest_index_first ? a < b : a > b;
  });
  for (std::int64_t left = total - assigned, k = 0; left > 0; --left, ++k)
    ++shares[order[static_cast<std::size_t>(k)]];
  return shares;
}

std::vector<std::int64_t> apportion(std::int64_t total,
                                    std::span<const std::uint64_t> weights, TieBreak tie) {
  std::vector<Rational> exact(weights.begin(), weights.end());
  return apportion(total, exact, tie);
}

Rational exact_rational(double value) {
  if (!std::isfinite(value)) throw ConfigError("non-finite value has no rational form");
  int exponent = 0;
  const double mantissa = std::frexp(value, &exponent);
  // 53 significant bits scaled to an integer.
  const auto scaled = static_cast<std::int64_t>(std::ldexp(mantissa, 53));
  exponent -= 53;
  Rational r = scaled;
  if (exponent >= 0)
    r *= Rational(cpp_int(1) << exponent);
  else
    r /= Rational(cpp_int(1) << -exponent);
  return r;
}

Rational decimal_rational(double value) {
  if (!std::isfinite(value)) throw ConfigError("non-finite value has no rational form");
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  const std::string_view text(buf.data(), static_cast<std::size_t>(res.ptr - buf.data()));

  std::size_t pos = 0;
  const bool negative = !text.empty() && text[0] == '-';
  if (negative) ++pos;
  cpp_int digits = 0;
  int scale = 0;
  bool after_point = false;
  for (; pos < text.size() && text[pos] != 'e'; ++pos) {
    if (text[pos] == '.') {
      after_point = true;
      continue;
    }
    digits = digits * 10 + (text[pos] - '0');
    if (after_point) --scale;
  }
  if (pos < text.size()) {
    int exp10 = 0;
    const char* first = text.data() + pos + 1;
    if (first != text.data() + text.size() && *first == '+') ++first;  // from_chars rejects '+'
    std::from_chars(first, text.data() + text.size(), exp10);
    scale += exp10;
  }
  Rational r = digits;
  cpp_int power = 1;
  for (int i = 0; i < std::abs(scale); ++i) power *= 10;
  if (scale >= 0)
    r *= Rational(power);
  else
    r /= Rational(power);
  return negative ? Rational(-r) : r;
}

std::int64_t round_product(double value, std::uint64_t n) {
  const Rational product = decimal_rational(value) * n;
  const Rational shifted = product >= 0 ? product + Rational(1, 2) : product - Rational(1, 2);
  // cpp_int division truncates toward zero.
  return static_cast<std::int64_t>(cpp_int(numerator(shifted) / denominator(shifted)));
}

}  // namespace noiseforge
