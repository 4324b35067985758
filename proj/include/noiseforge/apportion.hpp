#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

namespace noiseforge {

using Rational = boost::multiprecision::cpp_rational;

/// Which index wins when two fractional remainders are equal.
enum class TieBreak { lowest_index_first, highest_index_first };

/// Largest-remainder (Hamilton) apportionment of `total` units in proportion
/// to non-negative `weights`. Each share is floored, then the leftover units
/// go one each to the largest fractional parts. The result always sums to
/// `total`. All weights zero is an error unless total is zero.
std::vector<std::int64_t> apportion(std::int64_t total, std::span<const Rational> weights,
                                    TieBreak tie = TieBreak::lowest_index_first);

std::vector<std::int64_t> apportion(std::int64_t total,
                                    std::span<const std::uint64_t> weights,
                                    TieBreak tie = TieBreak::lowest_index_first);

/// Exact rational value of a finite double.
Rational exact_rational(double value);

/// The decimal a user most likely typed: the shortest decimal string that
/// round-trips to `value`, read as an exact fraction (0.35 -> 7/20).
Rational decimal_rational(double value);

/// round(value * n) with halves rounded away from zero, where value is read
/// through decimal_rational.
std::int64_t round_product(double value, std::uint64_t n);

}  // namespace noiseforge
