#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "noiseforge/dataset_io.hpp"

namespace noiseforge {

/// Per-class sufficient statistics for squared-distance sums.
///
/// The sum of squared distances from a point x to every member of class j is
///
///   sum_i |x - x_i|^2 = m_j |x|^2 - 2 x . sum_j + sumsq_j
///                     = m_j |x - mean_j|^2 + scatter_j
///
/// The second (centered) form is what the fast path evaluates; it is the
/// same identity but does not cancel catastrophically when features carry a
/// large common offset.
struct ClassAggregates {
  std::size_t n_classes = 0;
  std::size_t dim = 0;
  std::vector<std::uint64_t> count;  // m_j
  std::vector<double> sum;           // C x d, sum of member vectors
  std::vector<double> sum_sq_norm;   // sum of |x_i|^2 per class
  std::vector<double> mean;          // C x d
  std::vector<double> scatter;       // sum of |x_i - mean_j|^2 per class

  std::span<const double> class_sum(std::size_t j) const noexcept {
    return {sum.data() + j * dim, dim};
  }
  std::span<const double> class_mean(std::size_t j) const noexcept {
    return {mean.data() + j * dim, dim};
  }
};

/// Aggregates in double precision. The reduction runs over fixed 4096-row
/// chunks merged in chunk order, so results do not depend on `threads`.
ClassAggregates class_aggregates(const LabeledDataset& ds, unsigned threads = 1);

/// Sum of squared distances from sample k to every member of class j
/// (the sample itself contributes 0 when j is its own class).
double group_distance(std::size_t k, std::size_t j, const ClassAggregates& agg,
                      const LabeledDataset& ds);

/// Total squared distance from sample k to the other members of its class.
double l_intra(std::size_t k, const ClassAggregates& agg, const LabeledDataset& ds);

/// Total squared distance from sample k to every sample of another class.
/// Throws DataError when the dataset has fewer than two populated classes.
double l_inter(std::size_t k, const ClassAggregates& agg, const LabeledDataset& ds);

/// Squared distance from sample k to the members of foreign class j.
double l_inter_j(std::size_t k, std::size_t j, const ClassAggregates& agg,
                 const LabeledDataset& ds);

/// l_intra / l_inter. Throws DegenerateGeometryError when l_inter is 0.
double con_k(std::size_t k, const ClassAggregates& agg, const LabeledDataset& ds);

/// l_intra / l_inter_j for a populated foreign class j.
double con_k_j(std::size_t k, std::size_t j, const ClassAggregates& agg,
               const LabeledDataset& ds);

/// Con_{k-j} for every class j. Entries for the sample's own class and for
/// empty classes are 0 and marked undefined.
struct ForeignConcentration {
  std::vector<double> value;
  std::vector<bool> defined;
};
ForeignConcentration con_row(std::size_t k, const ClassAggregates& agg,
                             const LabeledDataset& ds);

/// Con_k for every sample, computed data-parallel.
std::vector<double> all_con_k(const ClassAggregates& agg, const LabeledDataset& ds,
                              unsigned threads = 1);

using IntervalWeights = std::array<std::uint64_t, kIntervals>;
inline constexpr IntervalWeights kDefaultIntervalWeights{1, 2, 4, 8, 16};

/// Throws ConfigError unless every weight is positive and non-decreasing.
void validate_interval_weights(const IntervalWeights& weights);

/// Interval sizes for a class of `class_size` samples: proportional to the
/// weights, largest-remainder rounded, equal remainders resolved toward the
/// widest interval.
std::array<std::size_t, kIntervals> interval_sizes(std::size_t class_size,
                                                   const IntervalWeights& weights);

struct ClassIntervals {
  /// Sample indices per interval, each in ascending (Con_k, index) order.
  std::array<std::vector<std::size_t>, kIntervals> members;
  /// Con_k range covered by each interval; NaN for empty intervals.
  std::array<double, kIntervals> con_min{};
  std::array<double, kIntervals> con_max{};
  /// Set when the class has fewer samples than intervals.
  bool undersized = false;

  std::size_t size(std::size_t interval) const noexcept {
    return members[interval].size();
  }
};

struct ConcentrationProfile {
  std::vector<double> con;
  std::vector<std::uint8_t> interval_of;
  std::vector<ClassIntervals> classes;
  IntervalWeights weights = kDefaultIntervalWeights;
};

/// Sorts each class by (Con_k, sample index) and cuts it into rank-based
/// intervals of increasing width.
ConcentrationProfile partition_intervals(std::span<const double> con,
                                         const LabelVector& labels,
                                         const IntervalWeights& weights = kDefaultIntervalWeights);

/// class_aggregates + all_con_k + partition_intervals.
ConcentrationProfile concentration_profile(const LabeledDataset& ds,
                                           const IntervalWeights& weights = kDefaultIntervalWeights,
                                           unsigned threads = 1);

}  // namespace noiseforge
