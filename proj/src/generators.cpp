#include "noiseforge/generators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "noiseforge/apportion.hpp"
#include "noiseforge/parallel.hpp"
#include "noiseforge/random.hpp"

namespace noiseforge {

namespace {

void check_unit_interval(double v, const char* name) {
  if (!(v >= 0.0 && v <= 1.0))
    throw ConfigError(std::string(name) + " must lie in [0, 1], got " + std::to_string(v));
}

NoiseAssignment identity_assignment(const LabeledDataset& ds) {
  NoiseAssignment a;
  a.clean = ds.labels().labels;
  a.labels = a.clean;
  a.flipped.assign(ds.size(), 0);
  return a;
}

// Moves `surplus` units into cells with spare room, proportionally to that
// room, visiting the tiers in order until the surplus is placed.
void redistribute(std::int64_t surplus, std::vector<std::int64_t>& counts,
                  std::span<const std::int64_t> capacity,
                  const std::vector<std::vector<std::size_t>>& tiers) {
  for (const auto& tier : tiers) {
    if (surplus == 0) return;
    std::vector<Rational> room;
    std::int64_t total_room = 0;
    for (auto c : tier) {
      const auto r = std::max<std::int64_t>(capacity[c] - counts[c], 0);
      room.emplace_back(r);
      total_room += r;
    }
    if (total_room == 0) continue;
    const auto moved = std::min(surplus, total_room);
    const auto shares = apportion(moved, room);
    for (std::size_t t = 0; t < tier.size(); ++t) counts[tier[t]] += shares[t];
    surplus -= moved;
  }
  if (surplus > 0) throw DataError("noise budget exceeds the capacity of the dataset");
}

}  // namespace

Pattern parse_pattern(const std::string& name) {
  if (name == "symm-inc" || name == "symm_inc") return Pattern::symm_inc;
  if (name == "symm-exc" || name == "symm_exc") return Pattern::symm_exc;
  if (name == "asym") return Pattern::asym;
  if (name == "rgn") return Pattern::rgn;
  throw ConfigError("unknown noise pattern `" + name +
                    "` (expected symm-inc, symm-exc, asym or rgn)");
}

std::string pattern_name(Pattern p) {
  switch (p) {
    case Pattern::symm_inc: return "symm-inc";
    case Pattern::symm_exc: return "symm-exc";
    case Pattern::asym: return "asym";
    case Pattern::rgn: return "rgn";
  }
  return "unknown";
}

void validate_spec(const NoiseSpec& spec, std::size_t n_classes) {
  switch (spec.pattern) {
    case Pattern::symm_inc:
    case Pattern::symm_exc:
      if (n_classes < 2) throw ConfigError("symmetric noise needs at least 2 classes");
      check_unit_interval(spec.tau, "tau");
      break;
    case Pattern::asym:
      check_unit_interval(spec.tau, "tau");
      if (spec.asym_map.empty()) throw ConfigError("asymmetric noise needs a non-empty class map");
      for (const auto& [from, to] : spec.asym_map) {
        if (from == to)
          throw ConfigError("asymmetric map has a self-loop on class " + std::to_string(from));
        if (from >= n_classes || to >= n_classes)
          throw ConfigError("asymmetric map entry " + std::to_string(from) + "->" +
                            std::to_string(to) + " is outside the class range");
      }
      break;
    case Pattern::rgn:
      if (n_classes < 2) throw ConfigError("rgn noise needs at least 2 classes");
      check_unit_interval(spec.rho0, "rho0");
      if (!(spec.mu1 >= 0.0) || !(spec.mu2 >= 0.0))
        throw ConfigError("mu1 and mu2 must be non-negative");
      if (std::abs(spec.mu1 + spec.mu2 - 1.0) > 1e-12)
        throw ConfigError("mu1 + mu2 must equal 1");
      validate_interval_weights(spec.interval_weights);
      break;
  }
}

bool NoiseBudget::class_capped(std::size_t j) const {
  return std::any_of(caps.begin(), caps.end(),
                     [j](const CapAdjustment& c) { return c.class_id == j; });
}

std::size_t NoiseAssignment::flip_count() const noexcept {
  return static_cast<std::size_t>(std::count(flipped.begin(), flipped.end(), 1));
}

NoiseAssignment gen_symmetric(const LabeledDataset& ds, const NoiseSpec& spec) {
  if (spec.pattern != Pattern::symm_inc && spec.pattern != Pattern::symm_exc)
    throw ConfigError("gen_symmetric called with pattern " + pattern_name(spec.pattern));
  validate_spec(spec, ds.n_classes());
  auto a = identity_assignment(ds);
  const auto c = static_cast<std::uint64_t>(ds.n_classes());
  Engine rng(spec.seed);
  for (std::size_t k = 0; k < ds.size(); ++k) {
    if (!(uniform01(rng) < spec.tau)) continue;
    const auto own = a.clean[k];
    ClassId drawn;
    if (spec.pattern == Pattern::symm_inc) {
      drawn = static_cast<ClassId>(uniform_below(rng, c));
    } else {
      const auto r = static_cast<ClassId>(uniform_below(rng, c - 1));
      drawn = r < own ? r : r + 1;
    }
    a.labels[k] = drawn;
    a.flipped[k] = drawn != own ? 1 : 0;
  }
  return a;
}

NoiseAssignment gen_asymmetric(const LabeledDataset& ds, const NoiseSpec& spec) {
  if (spec.pattern != Pattern::asym)
    throw ConfigError("gen_asymmetric called with pattern " + pattern_name(spec.pattern));
  validate_spec(spec, ds.n_classes());
  auto a = identity_assignment(ds);
  Engine rng(spec.seed);
  for (std::size_t k = 0; k < ds.size(); ++k) {
    const auto it = spec.asym_map.find(a.clean[k]);
    if (it == spec.asym_map.end()) continue;
    if (!(uniform01(rng) < spec.tau)) continue;
    a.labels[k] = it->second;
    a.flipped[k] = 1;
  }
  return a;
}

SubsetIntervalStats subset_interval_stats(const NoisySubset& subset,
                                          const ConcentrationProfile& subset_profile) {
  if (subset_profile.interval_of.size() != subset.size())
    throw DataError("subset profile does not match the subset size");
  const std::size_t c = subset.n_classes();
  SubsetIntervalStats stats;
  stats.total.assign(c, {});
  stats.noisy.assign(c, {});
  for (std::size_t k = 0; k < subset.size(); ++k) {
    const auto j = subset.clean_labels[k];
    const auto i = subset_profile.interval_of[k];
    ++stats.total[j][i];
    if (subset.noisy_labels[k] != j) ++stats.noisy[j][i];
  }
  return stats;
}

NoiseBudget compute_budget(const LabeledDataset& ds, const ConcentrationProfile& profile,
                           const SubsetIntervalStats& subset_stats,
                           const ClassNoiseProfile& noise, double rho0,
                           const IntervalWeights& fallback_weights) {
  check_unit_interval(rho0, "rho0");
  validate_interval_weights(fallback_weights);
  const std::size_t c = ds.n_classes();
  if (profile.classes.size() != c || noise.rho.size() != c ||
      subset_stats.noisy.size() != c)
    throw DataError("budget inputs disagree on the class count");

  NoiseBudget b;
  b.num_all = round_product(rho0, ds.size());
  b.class_rate.assign(c, 0.0);
  b.interval_rate.assign(c, {});
  b.interval_count.assign(c, {});
  b.interval_rate_fallback.assign(c, false);

  const auto nc = ds.per_class_counts();
  std::vector<Rational> class_weight(c);
  Rational weight_sum = 0;
  for (std::size_t j = 0; j < c; ++j) {
    Rational rho = 0;
    if (noise.support[j] > 0)
      rho = noise.exact_counts ? Rational(noise.flips[j], noise.support[j])
                               : exact_rational(noise.rho[j]);
    class_weight[j] = rho * nc[j];
    weight_sum += class_weight[j];
  }
  if (weight_sum == 0) {
    if (b.num_all > 0) throw DataError("subset carries no noise pattern");
    b.class_count.assign(c, 0);
    return b;
  }
  for (std::size_t j = 0; j < c; ++j)
    b.class_rate[j] = static_cast<double>(class_weight[j] / weight_sum);
  b.class_count = apportion(b.num_all, class_weight);

  // Class-level capacity: a class cannot flip more samples than it holds.
  std::vector<std::int64_t> class_capacity(nc.begin(), nc.end());
  std::int64_t surplus = 0;
  for (std::size_t j = 0; j < c; ++j) {
    if (b.class_count[j] > class_capacity[j]) {
      b.caps.push_back({j, std::nullopt, b.class_count[j], class_capacity[j]});
      b.log.push_back("class " + std::to_string(j) + ": requested " +
                      std::to_string(b.class_count[j]) + " flips, capped at " +
                      std::to_string(class_capacity[j]));
      surplus += b.class_count[j] - class_capacity[j];
      b.class_count[j] = class_capacity[j];
    }
  }
  if (surplus > 0) {
    std::vector<std::size_t> noisy_classes, quiet_classes;
    for (std::size_t j = 0; j < c; ++j)
      (class_weight[j] > 0 ? noisy_classes : quiet_classes).push_back(j);
    redistribute(surplus, b.class_count, class_capacity, {noisy_classes, quiet_classes});
    b.log.push_back("redistributed " + std::to_string(surplus) +
                    " capped flips across classes by residual capacity");
  }

  for (std::size_t j = 0; j < c; ++j) {
    const auto& counts = subset_stats.noisy[j];
    const auto subset_noisy = std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
    std::vector<Rational> rate_weight(kIntervals);
    if (subset_noisy > 0) {
      for (std::size_t i = 0; i < kIntervals; ++i) {
        rate_weight[i] = Rational(counts[i], subset_noisy);
        b.interval_rate[j][i] = static_cast<double>(rate_weight[i]);
      }
    } else {
      const auto w_sum = std::accumulate(fallback_weights.begin(), fallback_weights.end(),
                                         std::uint64_t{0});
      for (std::size_t i = 0; i < kIntervals; ++i) {
        rate_weight[i] = Rational(fallback_weights[i], w_sum);
        b.interval_rate[j][i] = static_cast<double>(rate_weight[i]);
      }
      b.interval_rate_fallback[j] = true;
      if (b.class_count[j] > 0)
        b.log.push_back("class " + std::to_string(j) +
                        ": subset has no noisy samples, interval rates fall back to "
                        "the interval weights");
    }

    auto cells = apportion(b.class_count[j], rate_weight);
    std::vector<std::int64_t> capacity(kIntervals);
    for (std::size_t i = 0; i < kIntervals; ++i)
      capacity[i] = static_cast<std::int64_t>(profile.classes[j].size(i));

    std::int64_t cell_surplus = 0;
    for (std::size_t i = 0; i < kIntervals; ++i) {
      if (cells[i] > capacity[i]) {
        b.caps.push_back({j, i, cells[i], capacity[i]});
        b.log.push_back("class " + std::to_string(j) + " interval " + std::to_string(i) +
                        ": requested " + std::to_string(cells[i]) + " flips, capped at " +
                        std::to_string(capacity[i]));
        cell_surplus += cells[i] - capacity[i];
        cells[i] = capacity[i];
      }
    }
    if (cell_surplus > 0) {
      std::vector<std::size_t> all(kIntervals);
      std::iota(all.begin(), all.end(), 0);
      redistribute(cell_surplus, cells, capacity, {all});
    }
    std::copy(cells.begin(), cells.end(), b.interval_count[j].begin());
  }
  return b;
}

std::vector<std::size_t> select_noisy_samples(const NoiseBudget& budget,
                                              const ConcentrationProfile& profile,
                                              std::uint64_t seed, unsigned threads) {
  const std::size_t c = budget.interval_count.size();
  if (profile.classes.size() != c)
    throw DataError("budget and profile disagree on the class count");
  std::vector<std::vector<std::size_t>> picked(c * kIntervals);
  parallel_for_chunks(c * kIntervals, 1, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t cell = begin; cell < end; ++cell) {
      const std::size_t j = cell / kIntervals;
      const std::size_t i = cell % kIntervals;
      const auto want = static_cast<std::size_t>(budget.interval_count[j][i]);
      auto pool = profile.classes[j].members[i];
      if (want > pool.size())
        throw DataError("budget cell exceeds interval capacity");
      Engine rng(substream_seed(seed, j, i));
      // Partial Fisher-Yates: the first `want` slots become the sample.
      for (std::size_t s = 0; s < want; ++s) {
        const auto r = s + uniform_below(rng, pool.size() - s);
        std::swap(pool[s], pool[r]);
      }
      pool.resize(want);
      picked[cell] = std::move(pool);
    }
  });
  std::vector<std::size_t> out;
  for (auto& cell : picked) out.insert(out.end(), cell.begin(), cell.end());
  std::sort(out.begin(), out.end());
  return out;
}

FlipChoice choose_flip_label(ClassId own, const ForeignConcentration& con,
                             std::span<const double> flip_row, bool flip_row_defined,
                             double mu1, double mu2) {
  const std::size_t c = con.value.size();
  if (c < 2 || own >= c) throw DataError("flip label choice needs at least two classes");
  if (flip_row.size() != c) throw DataError("flip row length does not match the class count");

  FlipChoice out;
  out.p_transition.assign(c, 0.0);
  out.p_concentration.assign(c, 0.0);
  out.p_blend.assign(c, 0.0);

  if (flip_row_defined) {
    for (std::size_t j = 0; j < c; ++j)
      if (j != own) out.p_transition[j] = flip_row[j];
  } else {
    for (std::size_t j = 0; j < c; ++j)
      if (j != own) out.p_transition[j] = 1.0 / static_cast<double>(c - 1);
    out.fallback = "transition row undefined, uniform over foreign classes";
  }

  double con_sum = 0.0;
  for (std::size_t j = 0; j < c; ++j)
    if (j != own && con.defined[j]) con_sum += con.value[j];

  if (con_sum > 0.0) {
    for (std::size_t j = 0; j < c; ++j)
      if (j != own && con.defined[j]) out.p_concentration[j] = con.value[j] / con_sum;
    for (std::size_t j = 0; j < c; ++j)
      if (j != own) out.p_blend[j] = mu1 * out.p_transition[j] + mu2 * out.p_concentration[j];
  } else {
    out.p_blend = out.p_transition;
    out.fallback += std::string(out.fallback.empty() ? "" : "; ") +
                    "concentration row is zero, using the transition row alone";
  }

  std::size_t best = own == 0 ? 1 : 0;
  for (std::size_t j = 0; j < c; ++j) {
    if (j == own) continue;
    if (out.p_blend[j] > out.p_blend[best]) best = j;
  }
  out.label = static_cast<ClassId>(best);
  return out;
}

NoiseAssignment gen_rgn(const LabeledDataset& ds, const NoisySubset& subset,
                        const NoiseSpec& spec, unsigned threads) {
  if (spec.pattern != Pattern::rgn)
    throw ConfigError("gen_rgn called with pattern " + pattern_name(spec.pattern));
  if (subset.n_classes() != ds.n_classes())
    throw DataError("subset and dataset disagree on the class count");
  if (subset.features.dim() != ds.features().dim())
    throw DataError("subset and dataset features differ in dimension");
  validate_spec(spec, ds.n_classes());

  RgnDiagnostics diag;
  diag.transition = estimate_transition(subset);
  diag.noise = class_noise_profile(diag.transition);

  const auto subset_profile =
      concentration_profile(subset.clean_dataset(), spec.interval_weights, threads);
  diag.subset_stats = subset_interval_stats(subset, subset_profile);

  const auto agg = class_aggregates(ds, threads);
  const auto con = all_con_k(agg, ds, threads);
  const auto profile = partition_intervals(con, ds.labels(), spec.interval_weights);
  for (const auto& ci : profile.classes) {
    std::array<std::size_t, kIntervals> sizes{};
    for (std::size_t i = 0; i < kIntervals; ++i) sizes[i] = ci.size(i);
    diag.clean_interval_sizes.push_back(sizes);
  }

  diag.budget = compute_budget(ds, profile, diag.subset_stats, diag.noise, spec.rho0,
                               spec.interval_weights);
  const auto selected = select_noisy_samples(diag.budget, profile, spec.seed, threads);

  auto a = identity_assignment(ds);
  a.flips.resize(selected.size());
  parallel_for_chunks(selected.size(), 64, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t s = begin; s < end; ++s) {
      const auto k = selected[s];
      const auto own = ds.labels()[k];
      auto& rec = a.flips[s];
      rec.sample = k;
      rec.clean = own;
      rec.choice = choose_flip_label(own, con_row(k, agg, ds), diag.noise.flip_rows[own],
                                     diag.noise.flip_row_defined[own], spec.mu1, spec.mu2);
    }
  });

  std::size_t fallbacks = 0;
  for (const auto& rec : a.flips) {
    a.labels[rec.sample] = rec.choice.label;
    a.flipped[rec.sample] = 1;
    if (!rec.choice.fallback.empty()) ++fallbacks;
  }
  a.log = diag.budget.log;
  if (fallbacks > 0)
    a.log.push_back(std::to_string(fallbacks) + " flips used a probability fallback");
  for (std::size_t j = 0; j < ds.n_classes(); ++j)
    if (diag.transition.support[j] == 0)
      a.log.push_back("class " + std::to_string(j) +
                      " has no samples in the subset; its transition row is undefined");
  a.rgn = std::move(diag);
  return a;
}

}  // namespace noiseforge
