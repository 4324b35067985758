#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "noiseforge/concentration.hpp"
#include "noiseforge/dataset_io.hpp"
#include "noiseforge/transition.hpp"

namespace noiseforge {

enum class Pattern { symm_inc, symm_exc, asym, rgn };

Pattern parse_pattern(const std::string& name);
std::string pattern_name(Pattern p);

struct NoiseSpec {
  Pattern pattern = Pattern::rgn;
  double rho0 = 0.0;  // rgn: target overall noise ratio
  double tau = 0.0;   // symmetric / asymmetric flip rate
  std::map<ClassId, ClassId> asym_map;
  double mu1 = 0.1;
  double mu2 = 0.9;
  std::uint64_t seed = 0;
  IntervalWeights interval_weights = kDefaultIntervalWeights;
};

/// Throws ConfigError when the fields needed by spec.pattern are out of range.
void validate_spec(const NoiseSpec& spec, std::size_t n_classes);

/// One capacity-capping event in the budget.
struct CapAdjustment {
  std::size_t class_id = 0;
  std::optional<std::size_t> interval;  // empty for a class-level cap
  std::int64_t requested = 0;
  std::int64_t capacity = 0;
};

struct NoiseBudget {
  std::int64_t num_all = 0;
  std::vector<double> class_rate;        // R_j
  std::vector<std::int64_t> class_count;  // Num_j
  std::vector<std::array<double, kIntervals>> interval_rate;        // r_{j-i}
  std::vector<std::array<std::int64_t, kIntervals>> interval_count;  // Num_{j-i}
  std::vector<bool> interval_rate_fallback;
  std::vector<CapAdjustment> caps;
  std::vector<std::string> log;

  bool class_capped(std::size_t j) const;
};

/// Per-class, per-interval sample and disagreement counts of the annotated
/// subset, grouped by clean label.
struct SubsetIntervalStats {
  std::vector<std::array<std::uint64_t, kIntervals>> total;
  std::vector<std::array<std::uint64_t, kIntervals>> noisy;
};

SubsetIntervalStats subset_interval_stats(const NoisySubset& subset,
                                          const ConcentrationProfile& subset_profile);

/// Turns a target ratio into integer flip counts per class and per interval.
/// Totals are conserved exactly; cells over capacity are capped and the
/// surplus moved to cells with room, each move recorded in `caps`.
NoiseBudget compute_budget(const LabeledDataset& ds, const ConcentrationProfile& profile,
                           const SubsetIntervalStats& subset_stats,
                           const ClassNoiseProfile& noise, double rho0,
                           const IntervalWeights& fallback_weights = kDefaultIntervalWeights);

/// Draws exactly interval_count[j][i] samples without replacement from each
/// interval, each cell on its own seeded stream. Returns sorted indices.
std::vector<std::size_t> select_noisy_samples(const NoiseBudget& budget,
                                              const ConcentrationProfile& profile,
                                              std::uint64_t seed, unsigned threads = 1);

struct FlipChoice {
  ClassId label = 0;
  std::vector<double> p_transition;     // p_{j-1}
  std::vector<double> p_concentration;  // p_{j-2}
  std::vector<double> p_blend;          // p_j
  std::string fallback;                 // empty unless a fallback fired
};

/// Blends the transition-derived and concentration-derived flip
/// distributions over foreign classes and returns the argmax (lowest class
/// index on ties). The own class is never chosen.
FlipChoice choose_flip_label(ClassId own, const ForeignConcentration& con,
                             std::span<const double> flip_row, bool flip_row_defined,
                             double mu1, double mu2);

struct FlipRecord {
  std::size_t sample = 0;
  ClassId clean = 0;
  FlipChoice choice;
};

struct RgnDiagnostics {
  TransitionMatrix transition;
  ClassNoiseProfile noise;
  SubsetIntervalStats subset_stats;
  std::vector<std::array<std::size_t, kIntervals>> clean_interval_sizes;
  NoiseBudget budget;
};

struct NoiseAssignment {
  std::vector<ClassId> clean;
  std::vector<ClassId> labels;
  std::vector<std::uint8_t> flipped;
  std::vector<FlipRecord> flips;  // RGN only, ascending by sample
  std::optional<RgnDiagnostics> rgn;
  std::vector<std::string> log;

  std::size_t flip_count() const noexcept;
};

NoiseAssignment gen_symmetric(const LabeledDataset& ds, const NoiseSpec& spec);
NoiseAssignment gen_asymmetric(const LabeledDataset& ds, const NoiseSpec& spec);
NoiseAssignment gen_rgn(const LabeledDataset& ds, const NoisySubset& subset,
                        const NoiseSpec& spec, unsigned threads = 1);

}  // namespace noiseforge
