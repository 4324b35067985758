#include "noiseforge/concentration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "noiseforge/apportion.hpp"
#include "noiseforge/parallel.hpp"

namespace noiseforge {

namespace {

constexpr std::size_t kReduceChunk = 4096;
constexpr std::size_t kSampleChunk = 256;

void check_sample(std::size_t k, const LabeledDataset& ds) {
  if (k >= ds.size())
    throw DataError("sample " + std::to_string(k) + " is outside a dataset of " +
                    std::to_string(ds.size()));
}

void check_class(std::size_t j, const ClassAggregates& agg) {
  if (j >= agg.n_classes)
    throw DataError("class " + std::to_string(j) + " is outside [0, " +
                    std::to_string(agg.n_classes) + ")");
}

}  // namespace

ClassAggregates class_aggregates(const LabeledDataset& ds, unsigned threads) {
  const std::size_t c = ds.n_classes();
  const std::size_t d = ds.features().dim();
  const std::size_t n = ds.size();
  const std::size_t n_chunks = (n + kReduceChunk - 1) / kReduceChunk;
  const auto& x = ds.features();
  const auto& y = ds.labels();

  ClassAggregates agg;
  agg.n_classes = c;
  agg.dim = d;
  agg.count.assign(c, 0);
  agg.sum.assign(c * d, 0.0);
  agg.sum_sq_norm.assign(c, 0.0);
  agg.mean.assign(c * d, 0.0);
  agg.scatter.assign(c, 0.0);

  // Pass 1: member sums and squared norms.
  struct Partial {
    std::vector<std::uint64_t> count;
    std::vector<double> sum;
    std::vector<double> sq;
  };
  std::vector<Partial> partials(n_chunks);
  parallel_for_chunks(n, kReduceChunk, threads, [&](std::size_t begin, std::size_t end) {
    Partial p{std::vector<std::uint64_t>(c, 0), std::vector<double>(c * d, 0.0),
              std::vector<double>(c, 0.0)};
    for (std::size_t i = begin; i < end; ++i) {
      const auto j = y[i];
      const auto row = x.row(i);
      double* s = p.sum.data() + j * d;
      double norm = 0.0;
      for (std::size_t t = 0; t < d; ++t) {
        const double v = row[t];
        s[t] += v;
        norm += v * v;
      }
      ++p.count[j];
      p.sq[j] += norm;
    }
    partials[begin / kReduceChunk] = std::move(p);
  });
  for (const auto& p : partials) {
    for (std::size_t j = 0; j < c; ++j) {
      agg.count[j] += p.count[j];
      agg.sum_sq_norm[j] += p.sq[j];
    }
    for (std::size_t t = 0; t < c * d; ++t) agg.sum[t] += p.sum[t];
  }
  for (std::size_t j = 0; j < c; ++j) {
    if (agg.count[j] == 0) continue;
    const auto m = static_cast<double>(agg.count[j]);
    for (std::size_t t = 0; t < d; ++t) agg.mean[j * d + t] = agg.sum[j * d + t] / m;
  }

  // Pass 2: centered scatter.
  std::vector<std::vector<double>> scatter_partials(n_chunks);
  parallel_for_chunks(n, kReduceChunk, threads, [&](std::size_t begin, std::size_t end) {
    std::vector<double> s(c, 0.0);
    for (std::size_t i = begin; i < end; ++i) {
      const auto j = y[i];
      const auto row = x.row(i);
      const double* mu = agg.mean.data() + j * d;
      double acc = 0.0;
      for (std::size_t t = 0; t < d; ++t) {
        const double diff = static_cast<double>(row[t]) - mu[t];
        acc += diff * diff;
      }
      s[j] += acc;
    }
    scatter_partials[begin / kReduceChunk] = std::move(s);
  });
  for (const auto& s : scatter_partials)
    for (std::size_t j = 0; j < c; ++j) agg.scatter[j] += s[j];
  return agg;
}

double group_distance(std::size_t k, std::size_t j, const ClassAggregates& agg,
                      const LabeledDataset& ds) {
  check_sample(k, ds);
  check_class(j, agg);
  if (agg.count[j] == 0) return 0.0;
  const auto row = ds.features().row(k);
  const auto mu = agg.class_mean(j);
  double dist = 0.0;
  for (std::size_t t = 0; t < agg.dim; ++t) {
    const double diff = static_cast<double>(row[t]) - mu[t];
    dist += diff * diff;
  }
  return static_cast<double>(agg.count[j]) * dist + agg.scatter[j];
}

double l_intra(std::size_t k, const ClassAggregates& agg, const LabeledDataset& ds) {
  check_sample(k, ds);
  return group_distance(k, ds.labels()[k], agg, ds);
}

double l_inter(std::size_t k, const ClassAggregates& agg, const LabeledDataset& ds) {
  check_sample(k, ds);
  const auto own = ds.labels()[k];
  double total = 0.0;
  bool any_foreign = false;
  for (std::size_t j = 0; j < agg.n_classes; ++j) {
    if (j == own || agg.count[j] == 0) continue;
    any_foreign = true;
    total += group_distance(k, j, agg, ds);
  }
  if (!any_foreign)
    throw DataError("inter-class distance is undefined: the dataset has a single populated class");
  return total;
}

double l_inter_j(std::size_t k, std::size_t j, const ClassAggregates& agg,
                 const LabeledDataset& ds) {
  check_sample(k, ds);
  check_class(j, agg);
  if (j == ds.labels()[k])
    throw DataError("class " + std::to_string(j) + " is the own class of sample " +
                    std::to_string(k));
  if (agg.count[j] == 0)
    throw DataError("class " + std::to_string(j) + " has no samples");
  return group_distance(k, j, agg, ds);
}

double con_k(std::size_t k, const ClassAggregates& agg, const LabeledDataset& ds) {
  const double inter = l_inter(k, agg, ds);
  if (inter <= 0.0)
    throw DegenerateGeometryError("sample " + std::to_string(k) +
                                  " has zero inter-class distance; Con_k is undefined");
  return l_intra(k, agg, ds) / inter;
}

double con_k_j(std::size_t k, std::size_t j, const ClassAggregates& agg,
               const LabeledDataset& ds) {
  const double inter = l_inter_j(k, j, agg, ds);
  if (inter <= 0.0)
    throw DegenerateGeometryError("sample " + std::to_string(k) +
                                  " has zero distance to class " + std::to_string(j) +
                                  "; Con_k_j is undefined");
  return l_intra(k, agg, ds) / inter;
}

ForeignConcentration con_row(std::size_t k, const ClassAggregates& agg,
                             const LabeledDataset& ds) {
  check_sample(k, ds);
  ForeignConcentration row{std::vector<double>(agg.n_classes, 0.0),
                           std::vector<bool>(agg.n_classes, false)};
  const auto own = ds.labels()[k];
  const double intra = l_intra(k, agg, ds);
  for (std::size_t j = 0; j < agg.n_classes; ++j) {
    if (j == own || agg.count[j] == 0) continue;
    const double inter = group_distance(k, j, agg, ds);
    if (inter <= 0.0) {
      if (intra == 0.0) {
        // 0/0: a singleton-like sample sitting exactly on class j.
        row.defined[j] = true;
        continue;
      }
      throw DegenerateGeometryError("sample " + std::to_string(k) +
                                    " has zero distance to class " + std::to_string(j) +
                                    "; Con_k_j is undefined");
    }
    row.value[j] = intra / inter;
    row.defined[j] = true;
  }
  return row;
}

std::vector<double> all_con_k(const ClassAggregates& agg, const LabeledDataset& ds,
                              unsigned threads) {
  std::vector<double> con(ds.size());
  parallel_for_chunks(ds.size(), kSampleChunk, threads,
                      [&](std::size_t begin, std::size_t end) {
                        for (std::size_t k = begin; k < end; ++k) con[k] = con_k(k, agg, ds);
                      });
  return con;
}

void validate_interval_weights(const IntervalWeights& weights) {
  for (std::size_t i = 0; i < kIntervals; ++i) {
    if (weights[i] == 0) throw ConfigError("interval weights must be positive");
    if (i > 0 && weights[i] < weights[i - 1])
      throw ConfigError("interval weights must be non-decreasing");
  }
}

std::array<std::size_t, kIntervals> interval_sizes(std::size_t class_size,
                                                   const IntervalWeights& weights) {
  validate_interval_weights(weights);
  const auto shares = apportion(static_cast<std::int64_t>(class_size),
                                std::span<const std::uint64_t>(weights),
                                TieBreak::highest_index_first);
  std::array<std::size_t, kIntervals> sizes{};
  for (std::size_t i = 0; i < kIntervals; ++i) sizes[i] = static_cast<std::size_t>(shares[i]);
  return sizes;
}

ConcentrationProfile partition_intervals(std::span<const double> con,
                                         const LabelVector& labels,
                                         const IntervalWeights& weights) {
  if (con.size() != labels.size())
    throw DataError("concentration vector and label vector differ in length");
  validate_interval_weights(weights);

  ConcentrationProfile profile;
  profile.con.assign(con.begin(), con.end());
  profile.interval_of.assign(con.size(), 0);
  profile.classes.resize(labels.n_classes);
  profile.weights = weights;

  std::vector<std::vector<std::size_t>> by_class(labels.n_classes);
  for (std::size_t k = 0; k < labels.size(); ++k) by_class[labels[k]].push_back(k);

  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t j = 0; j < labels.n_classes; ++j) {
    auto& members = by_class[j];
    std::sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) {
      if (con[a] != con[b]) return con[a] < con[b];
      return a < b;
    });
    auto& ci = profile.classes[j];
    ci.undersized = members.size() < kIntervals;
    const auto sizes = interval_sizes(members.size(), weights);
    std::size_t pos = 0;
    for (std::size_t i = 0; i < kIntervals; ++i) {
      ci.members[i].assign(members.begin() + static_cast<std::ptrdiff_t>(pos),
                           members.begin() + static_cast<std::ptrdiff_t>(pos + sizes[i]));
      pos += sizes[i];
      for (auto k : ci.members[i]) profile.interval_of[k] = static_cast<std::uint8_t>(i);
      ci.con_min[i] = ci.members[i].empty() ? nan : con[ci.members[i].front()];
      ci.con_max[i] = ci.members[i].empty() ? nan : con[ci.members[i].back()];
    }
  }
  return profile;
}

ConcentrationProfile concentration_profile(const LabeledDataset& ds,
                                           const IntervalWeights& weights,
                                           unsigned threads) {
  const auto agg = class_aggregates(ds, threads);
  const auto con = all_con_k(agg, ds, threads);
  return partition_intervals(con, ds.labels(), weights);
}

}  // namespace noiseforge
