#include <doctest.h>

#include <random>

#include "noiseforge/analysis.hpp"
#include "test_support.hpp"

using namespace noiseforge;
using namespace noiseforge::testing;

namespace {

NoiseSpec rgn_spec(double rho0, std::uint64_t seed) {
  NoiseSpec s;
  s.pattern = Pattern::rgn;
  s.rho0 = rho0;
  s.seed = seed;
  return s;
}

// Subset drawn from the same centers as the dataset, with noise more likely
// in higher intervals.
NoisySubset graded_subset(std::size_t n, std::size_t c, std::uint64_t seed) {
  const auto sub = make_blobs(n, 4, c, seed);
  const auto profile = concentration_profile(sub);
  std::mt19937_64 rng(seed + 1);
  std::vector<ClassId> noisy = sub.labels().labels;
  for (std::size_t k = 0; k < n; ++k)
    if (rng() % 100 < 5 + 10 * profile.interval_of[k])
      noisy[k] = static_cast<ClassId>((noisy[k] + 1) % c);
  return NoisySubset({}, sub.features(), sub.labels(), LabelVector(noisy, c));
}

}  // namespace

TEST_CASE("an assignment without flips reports zero everywhere") {
  const auto ds = make_blobs(400, 3, 4, 1);
  const auto profile = concentration_profile(ds);
  const std::vector<std::uint8_t> none(400, 0);
  const auto r = interval_noise_report(ds, none, profile);
  CHECK(r.n_samples == 400);
  CHECK(r.n_noisy == 0);
  CHECK(r.overall_ratio == 0.0);
  for (const auto& cls : r.classes) {
    CHECK(cls.total == 100);
    CHECK(cls.ratio_non_decreasing());
    for (const auto& cell : cls.cells) CHECK(cell.ratio == 0.0);
  }
}

TEST_CASE("cell tallies follow interval membership") {
  const auto ds = make_1d({0, 1, 2, 3, 4, 5, 6}, {0, 0, 0, 0, 0, 0, 1}, 3);
  const std::vector<double> con{6, 5, 4, 3, 2, 1, 0};
  const auto profile = partition_intervals(con, ds.labels());
  // Class 0 sizes for 6 members: [0, 0, 1, 2, 3]; sample 5 sits alone in interval 2.
  const std::vector<std::uint8_t> noisy{1, 0, 0, 0, 1, 0, 1};
  const auto r = interval_noise_report(ds, noisy, profile);
  const auto& c0 = r.classes[0];
  CHECK(c0.cells[0].empty);
  CHECK(c0.cells[1].empty);
  CHECK(c0.cells[2].total == 1);
  CHECK(c0.cells[2].noisy == 0);
  CHECK(c0.cells[3].total == 2);
  CHECK(c0.cells[4].total == 3);
  CHECK(c0.cells[4].noisy == 1);
  CHECK(c0.cells[4].ratio == doctest::Approx(1.0 / 3));
  CHECK(c0.cells[4].con_min == 4.0);
  CHECK(c0.cells[4].con_max == 6.0);
  CHECK(c0.noisy == 2);
  CHECK(c0.cells[3].noisy == 1);  // sample 4 has Con 2, ratio 1/2 > 1/3
  CHECK_FALSE(c0.ratio_non_decreasing());
  CHECK(r.classes[1].noisy == 1);
  CHECK(r.classes[2].total == 0);
  CHECK(r.n_noisy == 3);
  CHECK(r.overall_ratio == doctest::Approx(3.0 / 7));

  CHECK_THROWS_AS(interval_noise_report(ds, std::vector<std::uint8_t>(3, 0), profile), DataError);
}

TEST_CASE("non-decreasing check skips empty cells") {
  ClassIntervalReport rep;
  rep.cells[0] = {10, 1, 0.1, false, 0, 0};
  rep.cells[2] = {10, 3, 0.3, false, 0, 0};
  rep.cells[4] = {10, 3, 0.3, false, 0, 0};
  CHECK(rep.ratio_non_decreasing());
  rep.cells[3] = {10, 2, 0.2, false, 0, 0};
  CHECK_FALSE(rep.ratio_non_decreasing());
}

TEST_CASE("accuracy examples") {
  CHECK(overall_accuracy(LabelVector({0, 0}, 2), LabelVector({0, 1}, 2)) == 0.5);
  CHECK(overall_accuracy(LabelVector({1, 2, 0}, 3), LabelVector({1, 2, 0}, 3)) == 1.0);
  CHECK_THROWS_AS(overall_accuracy(LabelVector({0}, 2), LabelVector({0, 1}, 2)), DataError);
  CHECK_THROWS_AS(overall_accuracy(LabelVector({}, 2), LabelVector({}, 2)), DataError);
}

TEST_CASE("random guessing scores about 1/C") {
  std::mt19937_64 rng(8);
  const std::size_t n = 50000, c = 10;
  std::vector<ClassId> truth(n), guess(n);
  for (std::size_t k = 0; k < n; ++k) {
    truth[k] = static_cast<ClassId>(rng() % c);
    guess[k] = static_cast<ClassId>(rng() % c);
  }
  const double acc = overall_accuracy(LabelVector(guess, c), LabelVector(truth, c));
  CHECK(std::abs(acc - 0.1) <= 0.01);

  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<ClassId> pt(n), pg(n);
  for (std::size_t k = 0; k < n; ++k) {
    pt[k] = truth[perm[k]];
    pg[k] = guess[perm[k]];
  }
  CHECK(overall_accuracy(LabelVector(pg, c), LabelVector(pt, c)) == acc);
}

TEST_CASE("a generated assignment closes against its budget") {
  const std::size_t c = 5;
  const auto ds = make_blobs(5000, 4, c, 33);
  const auto subset = graded_subset(500, c, 33);
  for (double rho0 : {0.1, 0.4, 0.8}) {
    const auto a = gen_rgn(ds, subset, rgn_spec(rho0, 3));
    const auto profile = concentration_profile(ds);
    const auto report = interval_noise_report(ds, a, profile);
    const auto closure = check_closure(report, a.rgn->budget);
    CHECK(closure.ok());
    CHECK(closure.max_rounding_gap < 1.0);
    CHECK(report.n_noisy == static_cast<std::size_t>(a.rgn->budget.num_all));
    for (std::size_t j = 0; j < c; ++j)
      for (std::size_t i = 0; i < kIntervals; ++i)
        CHECK(report.classes[j].cells[i].noisy ==
              static_cast<std::size_t>(a.rgn->budget.interval_count[j][i]));
  }
}

TEST_CASE("closure reports tampered assignments") {
  const std::size_t c = 4;
  const auto ds = make_blobs(2000, 4, c, 44);
  const auto subset = graded_subset(400, c, 44);
  auto a = gen_rgn(ds, subset, rgn_spec(0.2, 9));
  const auto profile = concentration_profile(ds);
  std::size_t k = 0;
  while (a.flipped[k]) ++k;
  a.flipped[k] = 1;
  const auto closure = check_closure(interval_noise_report(ds, a, profile), a.rgn->budget);
  CHECK_FALSE(closure.ok());
  CHECK(closure.violations.size() >= 2);
}
