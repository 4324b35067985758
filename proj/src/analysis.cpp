#include "noiseforge/analysis.hpp"

#include <algorithm>
#include <cmath>

namespace noiseforge {

bool ClassIntervalReport::ratio_non_decreasing() const {
  double prev = -1.0;
  for (const auto& cell : cells) {
    if (cell.empty) continue;
    if (cell.ratio < prev) return false;
    prev = cell.ratio;
  }
  return true;
}

IntervalNoiseReport interval_noise_report(const LabeledDataset& ds,
                                          std::span<const std::uint8_t> noisy,
                                          const ConcentrationProfile& profile) {
  if (noisy.size() != ds.size() || profile.interval_of.size() != ds.size())
    throw DataError("assignment, profile and dataset lengths differ (" +
                    std::to_string(noisy.size()) + ", " +
                    std::to_string(profile.interval_of.size()) + ", " +
                    std::to_string(ds.size()) + ")");
  if (profile.classes.size() != ds.n_classes())
    throw DataError("profile and dataset disagree on the class count");

  IntervalNoiseReport report;
  report.classes.resize(ds.n_classes());
  report.n_samples = ds.size();
  for (std::size_t k = 0; k < ds.size(); ++k) {
    auto& cls = report.classes[ds.labels()[k]];
    auto& cell = cls.cells[profile.interval_of[k]];
    ++cell.total;
    ++cls.total;
    if (noisy[k]) {
      ++cell.noisy;
      ++cls.noisy;
      ++report.n_noisy;
    }
  }
  for (std::size_t j = 0; j < ds.n_classes(); ++j) {
    for (std::size_t i = 0; i < kIntervals; ++i) {
      auto& cell = report.classes[j].cells[i];
      cell.empty = cell.total == 0;
      if (!cell.empty) {
        cell.ratio = static_cast<double>(cell.noisy) / static_cast<double>(cell.total);
        cell.con_min = profile.classes[j].con_min[i];
        cell.con_max = profile.classes[j].con_max[i];
      }
    }
  }
  report.overall_ratio =
      static_cast<double>(report.n_noisy) / static_cast<double>(report.n_samples);
  return report;
}

IntervalNoiseReport interval_noise_report(const LabeledDataset& ds,
                                          const NoiseAssignment& assignment,
                                          const ConcentrationProfile& profile) {
  return interval_noise_report(ds, assignment.flipped, profile);
}

double overall_accuracy(const LabelVector& pred, const LabelVector& truth) {
  if (pred.size() != truth.size())
    throw DataError("prediction and truth vectors differ in length");
  if (truth.size() == 0) throw DataError("accuracy of an empty label vector is undefined");
  std::size_t matches = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) matches += pred[i] == truth[i] ? 1 : 0;
  return static_cast<double>(matches) / static_cast<double>(truth.size());
}

ClosureResult check_closure(const IntervalNoiseReport& report, const NoiseBudget& budget) {
  ClosureResult result;
  if (report.classes.size() != budget.interval_count.size()) {
    result.violations.push_back("report and budget disagree on the class count");
    return result;
  }
  if (static_cast<std::int64_t>(report.n_noisy) != budget.num_all)
    result.violations.push_back("realized flips " + std::to_string(report.n_noisy) +
                                " differ from the budget total " +
                                std::to_string(budget.num_all));

  for (std::size_t j = 0; j < report.classes.size(); ++j) {
    const auto& cls = report.classes[j];
    if (static_cast<std::int64_t>(cls.noisy) != budget.class_count[j])
      result.violations.push_back("class " + std::to_string(j) + ": realized " +
                                  std::to_string(cls.noisy) + " flips, budget " +
                                  std::to_string(budget.class_count[j]));
    for (std::size_t i = 0; i < kIntervals; ++i) {
      if (static_cast<std::int64_t>(cls.cells[i].noisy) != budget.interval_count[j][i])
        result.violations.push_back(
            "class " + std::to_string(j) + " interval " + std::to_string(i) + ": realized " +
            std::to_string(cls.cells[i].noisy) + " flips, budget " +
            std::to_string(budget.interval_count[j][i]));
    }
    if (budget.class_capped(j) || cls.noisy == 0) continue;

    const auto num_j = static_cast<double>(cls.noisy);
    for (std::size_t i = 0; i < kIntervals; ++i) {
      const double noisy = static_cast<double>(cls.cells[i].noisy);
      const double gap = std::abs(noisy - num_j * budget.interval_rate[j][i]);
      const double deviation = std::abs(noisy / num_j - budget.interval_rate[j][i]);
      result.max_rounding_gap = std::max(result.max_rounding_gap, gap);
      result.max_rate_deviation = std::max(result.max_rate_deviation, deviation);
      // Largest-remainder shares differ from their quota by less than one.
      if (gap >= 1.0 + 1e-9)
        result.violations.push_back("class " + std::to_string(j) + " interval " +
                                    std::to_string(i) + ": recovered count is " +
                                    std::to_string(gap) + " away from Num_j * r");
    }
  }
  return result;
}

}  // namespace noiseforge
