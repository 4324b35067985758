#include "noiseforge/transition.hpp"

#include <cmath>

namespace noiseforge {

TransitionMatrix TransitionMatrix::from_probabilities(std::size_t n_classes,
                                                      std::vector<double> t,
                                                      std::vector<std::uint64_t> support) {
  if (t.size() != n_classes * n_classes || support.size() != n_classes)
    throw DataError("transition matrix shape does not match its class count");
  for (std::size_t row = 0; row < n_classes; ++row) {
    double sum = 0.0;
    for (std::size_t col = 0; col < n_classes; ++col) {
      const double v = t[row * n_classes + col];
      if (!(v >= 0.0 && v <= 1.0))
        throw DataError("transition entry outside [0, 1] in row " + std::to_string(row));
      sum += v;
    }
    if (support[row] > 0 && std::abs(sum - 1.0) > 1e-9)
      throw DataError("transition row " + std::to_string(row) + " does not sum to 1");
  }
  TransitionMatrix tm;
  tm.n_classes = n_classes;
  tm.t = std::move(t);
  tm.support = std::move(support);
  return tm;
}

TransitionMatrix estimate_transition(const NoisySubset& subset) {
  return estimate_transition(subset.clean_labels, subset.noisy_labels);
}

TransitionMatrix estimate_transition(const LabelVector& clean_labels,
                                     const LabelVector& noisy_labels) {
  if (clean_labels.size() == 0)
    throw DataError("cannot estimate a transition matrix from an empty subset");
  if (clean_labels.size() != noisy_labels.size() ||
      clean_labels.n_classes != noisy_labels.n_classes)
    throw DataError("clean and noisy label vectors disagree in length or class count");
  const std::size_t c = clean_labels.n_classes;
  TransitionMatrix tm;
  tm.n_classes = c;
  tm.counts.assign(c * c, 0);
  tm.support.assign(c, 0);
  tm.t.assign(c * c, 0.0);

  for (std::size_t i = 0; i < clean_labels.size(); ++i) {
    const auto clean = clean_labels[i];
    ++tm.counts[clean * c + noisy_labels[i]];
    ++tm.support[clean];
  }
  for (std::size_t row = 0; row < c; ++row) {
    if (tm.support[row] == 0) continue;
    const auto denom = static_cast<double>(tm.support[row]);
    for (std::size_t col = 0; col < c; ++col)
      tm.t[row * c + col] = static_cast<double>(tm.counts[row * c + col]) / denom;
  }
  return tm;
}

ClassNoiseProfile class_noise_profile(const TransitionMatrix& tm) {
  const std::size_t c = tm.n_classes;
  ClassNoiseProfile p;
  p.rho.assign(c, 0.0);
  p.flips.assign(c, 0);
  p.support = tm.support;
  p.exact_counts = tm.has_counts();
  p.flip_rows.assign(c, std::vector<double>(c, 0.0));
  p.flip_row_defined.assign(c, false);

  double weighted = 0.0;
  std::uint64_t total_support = 0;
  for (std::size_t j = 0; j < c; ++j) {
    if (!tm.row_defined(j)) continue;
    total_support += tm.support[j];

    if (tm.has_counts()) {
      // Count ratios, so rho_j is exactly 0 when the row carries no flips.
      std::uint64_t off = 0;
      for (std::size_t k = 0; k < c; ++k)
        if (k != j) off += tm.count(j, k);
      p.flips[j] = off;
      p.rho[j] = static_cast<double>(off) / static_cast<double>(tm.support[j]);
      weighted += static_cast<double>(off);
      if (off == 0) continue;
      for (std::size_t k = 0; k < c; ++k)
        if (k != j)
          p.flip_rows[j][k] =
              static_cast<double>(tm.count(j, k)) / static_cast<double>(off);
    } else {
      double off = 0.0;
      for (std::size_t k = 0; k < c; ++k)
        if (k != j) off += tm.at(j, k);
      p.rho[j] = off;
      weighted += off * static_cast<double>(tm.support[j]);
      if (off <= 0.0) continue;
      for (std::size_t k = 0; k < c; ++k)
        if (k != j) p.flip_rows[j][k] = tm.at(j, k) / off;
    }
    p.flip_row_defined[j] = true;
  }
  if (total_support > 0) p.rho_overall = weighted / static_cast<double>(total_support);
  return p;
}

}  // namespace noiseforge
