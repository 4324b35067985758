#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "noiseforge/dataset_io.hpp"

namespace noiseforge {

/// Row-stochastic estimate of Pr(noisy = j | clean = i) from confusion counts.
/// Rows with zero support are left at zero and flagged, never fabricated.
struct TransitionMatrix {
  std::size_t n_classes = 0;
  std::vector<std::uint64_t> counts;  // C x C, row = clean, column = noisy; empty if given as probabilities
  std::vector<std::uint64_t> support;  // clean-label count per row
  std::vector<double> t;               // C x C

  double at(std::size_t clean, std::size_t noisy) const noexcept {
    return t[clean * n_classes + noisy];
  }
  std::uint64_t count(std::size_t clean, std::size_t noisy) const noexcept {
    return counts[clean * n_classes + noisy];
  }
  bool row_defined(std::size_t clean) const noexcept { return support[clean] > 0; }
  bool has_counts() const noexcept { return !counts.empty(); }

  /// Wraps a known probability matrix (rows summing to 1 where support > 0).
  static TransitionMatrix from_probabilities(std::size_t n_classes, std::vector<double> t,
                                             std::vector<std::uint64_t> support);
};

/// Per-class noise ratios and the flip distribution conditioned on a flip
/// occurring (off-diagonal row renormalized to sum 1).
struct ClassNoiseProfile {
  std::vector<double> rho;
  // Off-diagonal count per clean class; only meaningful when exact_counts.
  std::vector<std::uint64_t> flips;
  std::vector<std::uint64_t> support;  // clean-label count per class
  bool exact_counts = false;
  double rho_overall = 0.0;
  std::vector<std::vector<double>> flip_rows;
  std::vector<bool> flip_row_defined;
};

TransitionMatrix estimate_transition(const NoisySubset& subset);
TransitionMatrix estimate_transition(const LabelVector& clean, const LabelVector& noisy);

ClassNoiseProfile class_noise_profile(const TransitionMatrix& t);

}  // namespace noiseforge
