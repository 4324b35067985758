#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "noiseforge/concentration.hpp"
#include "noiseforge/dataset_io.hpp"
#include "noiseforge/generators.hpp"

namespace noiseforge {

struct IntervalCell {
  std::size_t total = 0;
  std::size_t noisy = 0;
  double ratio = 0.0;  // noisy / total; 0 when the cell is empty
  bool empty = true;
  double con_min = 0.0;
  double con_max = 0.0;
};

struct ClassIntervalReport {
  std::array<IntervalCell, kIntervals> cells;
  std::size_t total = 0;
  std::size_t noisy = 0;

  /// True when the noise ratio never drops from one non-empty interval to
  /// the next.
  bool ratio_non_decreasing() const;
};

/// Per-class, per-interval tallies of which samples carry a noisy label.
struct IntervalNoiseReport {
  std::vector<ClassIntervalReport> classes;
  std::size_t n_samples = 0;
  std::size_t n_noisy = 0;
  double overall_ratio = 0.0;
};

IntervalNoiseReport interval_noise_report(const LabeledDataset& ds,
                                          std::span<const std::uint8_t> noisy,
                                          const ConcentrationProfile& profile);

IntervalNoiseReport interval_noise_report(const LabeledDataset& ds,
                                          const NoiseAssignment& assignment,
                                          const ConcentrationProfile& profile);

/// Fraction of positions where pred equals truth.
double overall_accuracy(const LabelVector& pred, const LabelVector& truth);

/// Outcome of re-deriving a budget from a generated assignment.
struct ClosureResult {
  std::vector<std::string> violations;
  /// Largest |recovered r_{j-i} - input r_{j-i}| over uncapped classes.
  double max_rate_deviation = 0.0;
  /// Largest |Num_{j-i} - Num_j * r_{j-i}| over uncapped classes; < 1 under
  /// largest-remainder rounding.
  double max_rounding_gap = 0.0;

  bool ok() const noexcept { return violations.empty(); }
};

/// Checks that the report echoes the budget: every cell's noisy count equals
/// Num_{j-i}, the total equals Num_all, and for classes without capping the
/// recovered interval rates sit within rounding of the input rates.
ClosureResult check_closure(const IntervalNoiseReport& report, const NoiseBudget& budget);

}  // namespace noiseforge
