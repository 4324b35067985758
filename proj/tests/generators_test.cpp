#include <doctest.h>

#include <numeric>
#include <random>
#include <set>

#include "noiseforge/generators.hpp"
#include "test_support.hpp"

using namespace noiseforge;
using namespace noiseforge::testing;

namespace {

using Cells = std::array<std::int64_t, kIntervals>;
using Stats = std::array<std::uint64_t, kIntervals>;

// A 1-D dataset with the given per-class sizes; Con_k is taken as the
// sample index so interval membership is easy to reason about.
struct BudgetFixture {
  LabeledDataset ds;
  ConcentrationProfile profile;
};

BudgetFixture budget_fixture(const std::vector<std::size_t>& class_sizes) {
  std::vector<float> values;
  std::vector<ClassId> labels;
  for (std::size_t j = 0; j < class_sizes.size(); ++j)
    for (std::size_t s = 0; s < class_sizes[j]; ++s) {
      values.push_back(static_cast<float>(values.size()));
      labels.push_back(static_cast<ClassId>(j));
    }
  auto ds = make_1d(values, labels, class_sizes.size());
  std::vector<double> con(values.begin(), values.end());
  auto profile = partition_intervals(con, ds.labels());
  return {std::move(ds), std::move(profile)};
}

// Noise profile with `flips[j]` disagreements among `support[j]` subset samples.
ClassNoiseProfile noise_profile(const std::vector<std::size_t>& support,
                                const std::vector<std::size_t>& flips) {
  std::vector<ClassId> clean, noisy;
  const auto c = support.size();
  for (std::size_t j = 0; j < c; ++j)
    for (std::size_t s = 0; s < support[j]; ++s) {
      clean.push_back(static_cast<ClassId>(j));
      noisy.push_back(static_cast<ClassId>(s < flips[j] ? (j + 1) % c : j));
    }
  return class_noise_profile(estimate_transition(LabelVector(clean, c), LabelVector(noisy, c)));
}

SubsetIntervalStats stats_of(std::vector<Stats> noisy) {
  SubsetIntervalStats s;
  s.total = noisy;
  s.noisy = std::move(noisy);
  return s;
}

std::int64_t sum(const Cells& c) { return std::accumulate(c.begin(), c.end(), std::int64_t{0}); }

// Dataset plus an annotated subset drawn from the same class centers.
struct RgnFixture {
  LabeledDataset ds;
  LabeledDataset sub;
};

RgnFixture rgn_fixture(std::size_t n, std::size_t n_sub, std::size_t c, std::uint64_t seed) {
  return {make_blobs(n, 4, c, seed), make_blobs(n_sub, 4, c, seed)};
}

NoisySubset with_noise(const LabeledDataset& sub, const std::vector<ClassId>& noisy) {
  return NoisySubset({}, sub.features(), sub.labels(), LabelVector(noisy, sub.n_classes()));
}

NoiseSpec rgn_spec(double rho0, std::uint64_t seed = 1) {
  NoiseSpec s;
  s.pattern = Pattern::rgn;
  s.rho0 = rho0;
  s.seed = seed;
  return s;
}

}  // namespace

TEST_CASE("pattern names round-trip") {
  for (auto p : {Pattern::symm_inc, Pattern::symm_exc, Pattern::asym, Pattern::rgn})
    CHECK(parse_pattern(pattern_name(p)) == p);
  CHECK(parse_pattern("symm_exc") == Pattern::symm_exc);
  CHECK_THROWS_AS(parse_pattern("pairflip"), ConfigError);
}

TEST_CASE("symmetric exclusive noise statistics") {
  const std::size_t n = 100000, c = 10;
  const auto ds = make_1d(std::vector<float>(n, 0.f), [&] {
    std::vector<ClassId> l(n);
    for (std::size_t k = 0; k < n; ++k) l[k] = static_cast<ClassId>(k % c);
    return l;
  }(), c);
  NoiseSpec s;
  s.pattern = Pattern::symm_exc;
  s.tau = 0.4;
  s.seed = 42;
  const auto a = gen_symmetric(ds, s);
  std::vector<std::size_t> moved_to(c * c, 0);
  std::vector<double> into(c, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    CHECK((a.flipped[k] == 1) == (a.labels[k] != a.clean[k]));
    ++moved_to[a.clean[k] * c + a.labels[k]];
    if (a.flipped[k]) into[a.labels[k]] += 1.0;
  }
  CHECK(std::abs(static_cast<double>(a.flip_count()) / n - 0.40) <= 0.005);
  // Pooled over source classes the frequency is tight; a single source/target
  // cell has 10000 trials (sd about 0.002), so it gets a 5-sigma band.
  for (std::size_t j = 0; j < c; ++j)
    CHECK(std::abs(into[j] / (n - n / c) - 0.4 / 9) <= 0.005);
  for (std::size_t i = 0; i < c; ++i)
    for (std::size_t j = 0; j < c; ++j)
      if (i != j)
        CHECK(std::abs(static_cast<double>(moved_to[i * c + j]) / (n / c) - 0.4 / 9) <= 0.01);
  CHECK(gen_symmetric(ds, s).labels == a.labels);
}

TEST_CASE("symmetric inclusive noise keeps some redraws on the own class") {
  const std::size_t n = 100000, c = 10;
  std::vector<ClassId> l(n);
  for (std::size_t k = 0; k < n; ++k) l[k] = static_cast<ClassId>(k % c);
  const auto ds = make_1d(std::vector<float>(n, 0.f), l, c);
  NoiseSpec s;
  s.pattern = Pattern::symm_inc;
  s.tau = 0.4;
  s.seed = 9;
  const auto a = gen_symmetric(ds, s);
  CHECK(std::abs(static_cast<double>(a.flip_count()) / n - 0.36) <= 0.005);
}

TEST_CASE("symmetric noise with tau 0 or 1") {
  const auto ds = make_blobs(500, 2, 4, 3);
  NoiseSpec s;
  s.pattern = Pattern::symm_exc;
  s.tau = 0.0;
  CHECK(gen_symmetric(ds, s).labels == ds.labels().labels);
  s.tau = 1.0;
  CHECK(gen_symmetric(ds, s).flip_count() == 500);
  s.tau = 1.5;
  CHECK_THROWS_AS(gen_symmetric(ds, s), ConfigError);
}

TEST_CASE("asymmetric noise follows the class map") {
  const auto ds = make_blobs(10000, 2, 10, 4);
  NoiseSpec s;
  s.pattern = Pattern::asym;
  s.tau = 0.4;
  s.seed = 5;
  s.asym_map = {{7, 1}, {2, 7}, {5, 6}, {6, 5}, {3, 8}};
  const auto a = gen_asymmetric(ds, s);
  for (std::size_t k = 0; k < ds.size(); ++k) {
    const auto it = s.asym_map.find(a.clean[k]);
    if (it == s.asym_map.end()) CHECK(a.labels[k] == a.clean[k]);
    else CHECK((a.labels[k] == a.clean[k] || a.labels[k] == it->second));
  }

  s.tau = 0.0;
  CHECK(gen_asymmetric(ds, s).flip_count() == 0);

  s.tau = 0.5;
  s.asym_map = {{0, 1}};
  const auto ds0 = make_1d(std::vector<float>(10000, 0.f), std::vector<ClassId>(10000, 0), 2);
  const auto flips = static_cast<double>(gen_asymmetric(ds0, s).flip_count());
  CHECK(std::abs(flips - 5000.0) <= 150.0);

  s.asym_map = {{3, 3}};
  CHECK_THROWS_AS(gen_asymmetric(ds, s), ConfigError);
  s.asym_map = {{3, 12}};
  CHECK_THROWS_AS(gen_asymmetric(ds, s), ConfigError);
}

TEST_CASE("spec validation") {
  NoiseSpec s = rgn_spec(0.2);
  CHECK_NOTHROW(validate_spec(s, 3));
  s.mu1 = 0.3;
  CHECK_THROWS_AS(validate_spec(s, 3), ConfigError);
  s = rgn_spec(-0.1);
  CHECK_THROWS_AS(validate_spec(s, 3), ConfigError);
  s = rgn_spec(0.2);
  CHECK_THROWS_AS(validate_spec(s, 1), ConfigError);
}

TEST_CASE("budget for the two-class example") {
  const auto f = budget_fixture({100, 100});
  const auto noise = noise_profile({10, 10}, {1, 3});
  const auto stats = stats_of({Stats{0, 0, 0, 0, 1}, Stats{0, 0, 1, 0, 2}});
  const auto b = compute_budget(f.ds, f.profile, stats, noise, 0.2);
  CHECK(b.num_all == 40);
  CHECK(b.class_rate[0] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(b.class_rate[1] == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(b.class_count == std::vector<std::int64_t>{10, 30});
  CHECK(b.interval_count[0] == Cells{0, 0, 0, 0, 10});
  CHECK(b.interval_count[1] == Cells{0, 0, 10, 0, 20});
  CHECK(b.caps.empty());
}

TEST_CASE("equal class noise gives uniform class rates") {
  const std::size_t c = 4;
  const auto f = budget_fixture(std::vector<std::size_t>(c, 50));
  const auto noise = noise_profile(std::vector<std::size_t>(c, 20), std::vector<std::size_t>(c, 5));
  const auto stats = stats_of(std::vector<Stats>(c, Stats{0, 1, 1, 3, 5}));
  const auto b = compute_budget(f.ds, f.profile, stats, noise, 0.3);
  CHECK(b.num_all == 60);
  for (std::size_t j = 0; j < c; ++j) {
    CHECK(b.class_rate[j] == doctest::Approx(1.0 / c).epsilon(1e-12));
    CHECK(b.class_count[j] == 15);
    const std::array<double, kIntervals> r{0, .1, .1, .3, .5};
    for (std::size_t i = 0; i < kIntervals; ++i)
      CHECK(b.interval_rate[j][i] == doctest::Approx(r[i]).epsilon(1e-12));
    CHECK(sum(b.interval_count[j]) == 15);
  }
}

TEST_CASE("budget errors and the zero-noise case") {
  const auto f = budget_fixture({40, 40});
  const auto quiet = noise_profile({10, 10}, {0, 0});
  const auto stats = stats_of({Stats{}, Stats{}});
  CHECK_THROWS_AS(compute_budget(f.ds, f.profile, stats, quiet, 0.2), DataError);
  const auto b = compute_budget(f.ds, f.profile, stats, quiet, 0.0);
  CHECK(b.num_all == 0);
  CHECK(b.class_count == std::vector<std::int64_t>{0, 0});
  CHECK_THROWS_AS(compute_budget(f.ds, f.profile, stats, quiet, 1.2), ConfigError);
}

TEST_CASE("class-level cap moves the surplus and falls back on interval weights") {
  const auto f = budget_fixture({10, 100});
  const auto noise = noise_profile({10, 10}, {10, 0});
  const auto stats = stats_of({Stats{0, 0, 0, 0, 10}, Stats{}});
  // Only class 0 is noisy, so it receives all 55 flips but holds 10.
  const auto b = compute_budget(f.ds, f.profile, stats, noise, 0.5);
  CHECK(b.num_all == 55);
  CHECK(b.class_count == std::vector<std::int64_t>{10, 45});
  CHECK(b.class_capped(0));
  CHECK_FALSE(b.class_capped(1));
  REQUIRE_FALSE(b.caps.empty());
  CHECK(b.caps[0].requested == 55);
  CHECK(b.caps[0].capacity == 10);
  CHECK(b.interval_rate_fallback[1]);
  CHECK(b.interval_count[1] == Cells{1, 3, 6, 12, 23});
  CHECK(b.interval_count[0] == Cells{0, 1, 1, 3, 5});  // capped cell spills down
}

TEST_CASE("interval-level cap redistributes by residual room") {
  const auto f = budget_fixture({31, 31});
  const auto noise = noise_profile({10, 10}, {2, 2});
  const auto stats = stats_of({Stats{2, 0, 0, 0, 0}, Stats{0, 0, 0, 0, 2}});
  const auto b = compute_budget(f.ds, f.profile, stats, noise, 20.0 / 62.0);
  CHECK(b.class_count == std::vector<std::int64_t>{10, 10});
  CHECK(b.interval_count[0] == Cells{1, 1, 1, 2, 5});
  CHECK(b.interval_count[1] == Cells{0, 0, 0, 0, 10});
  CHECK(b.caps.size() == 1);
  CHECK(b.caps[0].interval == std::optional<std::size_t>{0});
  CHECK_FALSE(b.log.empty());
}

TEST_CASE("budget totals are conserved over random inputs") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t c = 2 + rng() % 6;
    std::vector<std::size_t> sizes(c), support(c), flips(c);
    std::vector<Stats> noisy(c);
    for (std::size_t j = 0; j < c; ++j) {
      sizes[j] = rng() % 60;
      support[j] = 1 + rng() % 20;
      flips[j] = rng() % (support[j] + 1);
      std::size_t left = flips[j];
      for (std::size_t i = 0; i < kIntervals && left > 0; ++i) {
        const auto take = (i + 1 == kIntervals) ? left : rng() % (left + 1);
        noisy[j][i] = take;
        left -= take;
      }
    }
    if (std::accumulate(sizes.begin(), sizes.end(), std::size_t{0}) == 0) sizes[0] = 1;
    if (std::accumulate(flips.begin(), flips.end(), std::size_t{0}) == 0) {
      flips[0] = 1;
      noisy[0] = Stats{0, 0, 0, 0, 1};
    }
    const auto f = budget_fixture(sizes);
    const double rho0 = static_cast<double>(rng() % 101) / 100.0;
    const auto b = compute_budget(f.ds, f.profile, stats_of(noisy), noise_profile(support, flips), rho0);
    REQUIRE(std::accumulate(b.class_count.begin(), b.class_count.end(), std::int64_t{0}) == b.num_all);
    for (std::size_t j = 0; j < c; ++j) {
      REQUIRE(sum(b.interval_count[j]) == b.class_count[j]);
      REQUIRE(b.class_count[j] <= static_cast<std::int64_t>(sizes[j]));
      for (std::size_t i = 0; i < kIntervals; ++i) {
        REQUIRE(b.interval_count[j][i] >= 0);
        REQUIRE(b.interval_count[j][i] <= static_cast<std::int64_t>(f.profile.classes[j].size(i)));
      }
    }
  }
}

TEST_CASE("selection draws exactly the budget from each cell") {
  const auto f = budget_fixture({31, 31});
  NoiseBudget b;
  b.interval_count = {Cells{1, 2, 0, 3, 16}, Cells{0, 0, 0, 0, 0}};
  const auto picked = select_noisy_samples(b, f.profile, 99);
  CHECK(picked.size() == 22);
  CHECK(std::is_sorted(picked.begin(), picked.end()));
  std::array<std::size_t, kIntervals> per{};
  for (auto k : picked) {
    CHECK(f.ds.labels()[k] == 0);
    ++per[f.profile.interval_of[k]];
  }
  CHECK(per == std::array<std::size_t, kIntervals>{1, 2, 0, 3, 16});
  // A full cell takes every member.
  for (auto k : f.profile.classes[0].members[4])
    CHECK(std::binary_search(picked.begin(), picked.end(), k));

  CHECK(select_noisy_samples(b, f.profile, 99, 4) == picked);
  CHECK(select_noisy_samples(b, f.profile, 100) != picked);

  b.interval_count[1][0] = 5;
  CHECK_THROWS_AS(select_noisy_samples(b, f.profile, 99), DataError);
}

TEST_CASE("flip label blends transition and concentration rows") {
  ForeignConcentration con{{0.0, 0.6, 0.2}, {false, true, true}};
  const std::vector<double> row{0.0, 0.5, 0.5};
  const auto choice = choose_flip_label(0, con, row, true, 0.1, 0.9);
  CHECK(choice.p_concentration[1] == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(choice.p_concentration[2] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(std::abs(choice.p_blend[1] - 0.725) <= 1e-12);
  CHECK(std::abs(choice.p_blend[2] - 0.275) <= 1e-12);
  CHECK(choice.p_blend[0] == 0.0);
  CHECK(choice.label == 1);
  CHECK(choice.fallback.empty());

  // With all weight on the transition row, a one-hot row decides.
  const std::vector<double> onehot{0.0, 0.0, 1.0};
  CHECK(choose_flip_label(0, con, onehot, true, 1.0, 0.0).label == 2);
  CHECK(choose_flip_label(0, con, onehot, true, 0.0, 1.0).label == 1);
}

TEST_CASE("flip label ties and fallbacks") {
  ForeignConcentration even{{0.3, 0.0, 0.3, 0.3}, {true, false, true, true}};
  const std::vector<double> uniform{1.0 / 3, 0.0, 1.0 / 3, 1.0 / 3};
  CHECK(choose_flip_label(1, even, uniform, true, 0.5, 0.5).label == 0);

  const std::vector<double> none(4, 0.0);
  const auto undefined = choose_flip_label(1, even, none, false, 0.5, 0.5);
  CHECK_FALSE(undefined.fallback.empty());
  CHECK(undefined.p_transition[0] == doctest::Approx(1.0 / 3));
  CHECK(undefined.p_transition[1] == 0.0);

  ForeignConcentration zero{{0.0, 0.0, 0.0, 0.0}, {true, false, true, true}};
  const std::vector<double> row{0.1, 0.0, 0.2, 0.7};
  const auto z = choose_flip_label(1, zero, row, true, 0.1, 0.9);
  CHECK_FALSE(z.fallback.empty());
  CHECK(z.p_blend == z.p_transition);
  CHECK(z.label == 3);

  // Only the own class is ever excluded, even when it dominates the inputs.
  ForeignConcentration own_heavy{{9.0, 0.1, 0.1}, {false, true, true}};
  CHECK(choose_flip_label(0, own_heavy, std::vector<double>{0.0, 0.4, 0.6}, true, 0.5, 0.5).label == 2);
  CHECK_THROWS_AS(choose_flip_label(0, own_heavy, std::vector<double>{0.0, 1.0}, true, 0.5, 0.5),
                  DataError);
}

TEST_CASE("flip label is invariant to scaling the concentration row") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t c = 3 + rng() % 6;
    const auto own = static_cast<ClassId>(rng() % c);
    ForeignConcentration con{std::vector<double>(c), std::vector<bool>(c, true)};
    std::vector<double> row(c, 0.0);
    double rs = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      if (j == own) continue;
      con.value[j] = u(rng);
      row[j] = u(rng);
      rs += row[j];
    }
    con.defined[own] = false;
    con.value[own] = 0.0;
    for (auto& v : row) v /= rs;
    const auto base = choose_flip_label(own, con, row, true, 0.1, 0.9);
    ForeignConcentration scaled = con;
    for (auto& v : scaled.value) v *= 8.0;
    const auto other = choose_flip_label(own, scaled, row, true, 0.1, 0.9);
    REQUIRE(other.label == base.label);
    REQUIRE(base.label != own);
    double s = 0.0;
    for (double v : base.p_blend) s += v;
    REQUIRE(s == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("rgn with rho0 0 leaves labels untouched") {
  const auto f = rgn_fixture(2000, 300, 5, 21);
  std::vector<ClassId> noisy = f.sub.labels().labels;
  for (std::size_t k = 0; k < noisy.size(); k += 3) noisy[k] = (noisy[k] + 1) % 5;
  const auto a = gen_rgn(f.ds, with_noise(f.sub, noisy), rgn_spec(0.0));
  CHECK(a.labels == f.ds.labels().labels);
  CHECK(a.flip_count() == 0);
}

TEST_CASE("noise concentrated in the subset's top interval lands in the top interval") {
  const std::size_t c = 5;
  const auto f = rgn_fixture(5000, 500, c, 8);
  const auto sub_profile = concentration_profile(f.sub);
  std::vector<ClassId> noisy = f.sub.labels().labels;
  for (std::size_t k = 0; k < noisy.size(); ++k)
    if (sub_profile.interval_of[k] == kIntervals - 1 && k % 2 == 0)
      noisy[k] = static_cast<ClassId>((noisy[k] + 1) % c);

  const auto a = gen_rgn(f.ds, with_noise(f.sub, noisy), rgn_spec(0.1, 77));
  CHECK(a.flip_count() == 500);
  const auto& profile_sizes = a.rgn->clean_interval_sizes;
  CHECK(profile_sizes.size() == c);
  const auto profile = concentration_profile(f.ds);
  for (std::size_t k = 0; k < f.ds.size(); ++k) {
    if (!a.flipped[k]) continue;
    CHECK(profile.interval_of[k] == kIntervals - 1);
    CHECK(a.labels[k] != a.clean[k]);
  }
  CHECK(a.flips.size() == 500);
}

TEST_CASE("rgn realizes the budget exactly and is thread independent") {
  const std::size_t c = 6;
  const auto f = rgn_fixture(6000, 600, c, 12);
  const auto sub_profile = concentration_profile(f.sub);
  std::mt19937_64 rng(4);
  std::vector<ClassId> noisy = f.sub.labels().labels;
  // Noise probability rises with the interval index.
  for (std::size_t k = 0; k < noisy.size(); ++k) {
    const double p = 0.05 + 0.12 * sub_profile.interval_of[k];
    if (static_cast<double>(rng() % 1000) / 1000.0 < p)
      noisy[k] = static_cast<ClassId>((noisy[k] + 1 + rng() % (c - 1)) % c);
  }
  const auto subset = with_noise(f.sub, noisy);
  const auto a = gen_rgn(f.ds, subset, rgn_spec(0.3, 5), 1);
  const auto b = gen_rgn(f.ds, subset, rgn_spec(0.3, 5), 4);
  CHECK(a.labels == b.labels);
  CHECK(a.flip_count() == 1800);
  CHECK(gen_rgn(f.ds, subset, rgn_spec(0.3, 6)).labels != a.labels);

  const auto& budget = a.rgn->budget;
  const auto profile = concentration_profile(f.ds);
  std::vector<Cells> realized(c, Cells{});
  for (std::size_t k = 0; k < f.ds.size(); ++k)
    if (a.flipped[k]) ++realized[a.clean[k]][profile.interval_of[k]];
  for (std::size_t j = 0; j < c; ++j) {
    CHECK(realized[j] == budget.interval_count[j]);
    // Transfer: the realized share per interval tracks the subset's share.
    if (!budget.class_capped(j) && budget.class_count[j] > 0)
      for (std::size_t i = 0; i < kIntervals; ++i)
        CHECK(std::abs(static_cast<double>(realized[j][i]) -
                       budget.class_count[j] * budget.interval_rate[j][i]) < 1.0);
  }
  for (const auto& rec : a.flips) CHECK(rec.choice.label != rec.clean);
}

TEST_CASE("rgn rejects mismatched inputs") {
  const auto f = rgn_fixture(500, 100, 4, 2);
  const auto sub = with_noise(f.sub, f.sub.labels().labels);
  NoiseSpec s = rgn_spec(0.1);
  s.pattern = Pattern::symm_exc;
  CHECK_THROWS_AS(gen_rgn(f.ds, sub, s), ConfigError);
  CHECK_THROWS_AS(gen_rgn(f.ds, sub, rgn_spec(0.1)), DataError);  // subset carries no noise
  const auto other = make_blobs(100, 3, 4, 2);
  std::vector<ClassId> noisy = other.labels().labels;
  noisy[0] = (noisy[0] + 1) % 4;
  CHECK_THROWS_AS(gen_rgn(f.ds, with_noise(other, noisy), rgn_spec(0.1)), DataError);
}
