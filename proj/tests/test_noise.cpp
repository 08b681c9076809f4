#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mkv/noise.hpp"
#include "mkv/solver.hpp"

using namespace mkv;

namespace {

JumpMeasureSpec dirac_spec(double mass, double point = 1.0) {
  JumpMeasureSpec spec;
  spec.total_mass = mass;
  spec.mark_law = DiracMark{{point}};
  return spec;
}

}  // namespace

TEST_CASE("brownian increments: degenerate grids and determinism") {
  const std::vector<double> single{0.0};
  CHECK(sample_brownian_increments(1, 0, single, 1).empty());
  const std::vector<double> empty;
  CHECK_THROWS_AS(sample_brownian_increments(1, 0, empty, 1), ConfigError);

  const auto grid = make_grid(1.0, 16);
  const auto a = sample_brownian_increments(5, 3, grid, 2);
  const auto b = sample_brownian_increments(5, 3, grid, 2);
  REQUIRE(a.size() == 16);
  REQUIRE(a[0].size() == 2);
  CHECK(a == b);
}

TEST_CASE("brownian increments match the N(0, dt) law in Monte Carlo") {
  const double dt = 0.01;
  const auto grid = make_grid(dt, 1);
  const std::size_t n = 100000;
  double sum = 0.0, sumsq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dw = sample_brownian_increments(7, i, grid, 1)[0][0];
    sum += dw;
    sumsq += dw * dw;
  }
  const double mean = sum / n;
  const double var = sumsq / n - mean * mean;
  CHECK(std::abs(mean) < 3.0 * (0.1 / std::sqrt(static_cast<double>(n))));
  CHECK(std::abs(var - dt) < 0.05 * dt);
}

TEST_CASE("jump trains: intensity zero, mean count, dirac marks, sorting") {
  CHECK(sample_jump_train(1, 0, 10.0, dirac_spec(0.0)).empty());
  CHECK_THROWS_AS(sample_jump_train(1, 0, -1.0, dirac_spec(1.0)), ConfigError);

  const double T = 10.0;
  const std::size_t reps = 10000;
  double total = 0.0;
  for (std::size_t i = 0; i < reps; ++i) {
    const auto train = sample_jump_train(11, i, T, dirac_spec(1.0));
    total += static_cast<double>(train.size());
    for (std::size_t j = 0; j < train.size(); ++j) {
      CHECK(train[j].mark == std::vector<double>{1.0});
      CHECK(train[j].time > 0.0);
      CHECK(train[j].time <= T);
      if (j > 0) CHECK(train[j].time >= train[j - 1].time);
    }
  }
  CHECK(std::abs(total / reps - T) < 0.3);  // 3 sigma of sqrt(10/10^4)
}

TEST_CASE("compensator integrals: constants, symmetry, second moments") {
  const auto id = [](double z) { return z; };
  const auto sq = [](double z) { return z * z; };

  CHECK(compensator_integral_1d([](double) { return 3.5; }, dirac_spec(1.0)) ==
        doctest::Approx(3.5));

  JumpMeasureSpec sym;
  sym.total_mass = 1.0;
  sym.mark_law = DiscreteMark{{{{2.0}, 0.5}, {{-2.0}, 0.5}}};
  CHECK(compensator_integral_1d(id, sym) == doctest::Approx(0.0));
  CHECK(compensator_integral_1d(sq, sym) == doctest::Approx(4.0));

  JumpMeasureSpec gauss;
  gauss.total_mass = 2.0;
  gauss.mark_law = GaussianMark{0.5, 1.5};
  // int z nu(dz) = mass * mean; int z^2 nu(dz) = mass * (std^2 + mean^2).
  CHECK(compensator_integral_1d(id, gauss) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(compensator_integral_1d(sq, gauss) ==
        doctest::Approx(2.0 * (2.25 + 0.25)).epsilon(1e-10));
}

TEST_CASE("compensated jump sums are centered (martingale property)") {
  // For f = c the compensated sum over [0,T] is c*(count - lambda*T).
  const double c = 2.0, T = 1.0, lambda = 1.0;
  const std::size_t paths = 10000;
  double sum = 0.0, sumsq = 0.0;
  for (std::size_t i = 0; i < paths; ++i) {
    const auto train = sample_jump_train(21, i, T, dirac_spec(lambda));
    const double v = c * static_cast<double>(train.size()) - c * lambda * T;
    sum += v;
    sumsq += v * v;
  }
  const double mean = sum / paths;
  const double se = std::sqrt((sumsq / paths - mean * mean) / paths);
  CHECK(std::abs(mean) < 4.0 * se);
}

TEST_CASE("noise path: regeneration is bit-exact and coarsening sums pairs") {
  const auto spec = dirac_spec(1.0);
  const auto grid = make_grid(1.0, 8);
  const NoisePath a = NoisePath::generate(3, grid, 4, 2, spec);
  const NoisePath b = NoisePath::generate(3, grid, 4, 2, spec);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t k = 0; k < 8; ++k) {
      const auto ia = a.increment(i, k);
      const auto ib = b.increment(i, k);
      CHECK(std::equal(ia.begin(), ia.end(), ib.begin()));
    }
    CHECK(a.jumps(i).size() == b.jumps(i).size());
  }

  const NoisePath coarse = a.coarsen();
  REQUIRE(coarse.steps() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t k = 0; k < 4; ++k) {
      for (std::size_t c = 0; c < 2; ++c) {
        CHECK(coarse.increment(i, k)[c] ==
              doctest::Approx(a.increment(i, 2 * k)[c] +
                              a.increment(i, 2 * k + 1)[c]));
      }
    }
    CHECK(coarse.jumps(i).size() == a.jumps(i).size());
  }
}

TEST_CASE("independence across particle streams") {
  const auto grid = make_grid(100.0, 10000);
  const auto w0 = sample_brownian_increments(31, 0, grid, 1);
  const auto w1 = sample_brownian_increments(31, 1, grid, 1);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t k = 0; k < w0.size(); ++k) {
    sxy += w0[k][0] * w1[k][0];
    sxx += w0[k][0] * w0[k][0];
    syy += w1[k][0] * w1[k][0];
  }
  CHECK(std::abs(sxy / std::sqrt(sxx * syy)) < 0.05);
}

TEST_CASE("jump measure specs are validated") {
  JumpMeasureSpec bad;
  bad.total_mass = -1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  JumpMeasureSpec weights;
  weights.total_mass = 1.0;
  weights.mark_law = DiscreteMark{{{{1.0}, 0.7}, {{-1.0}, 0.7}}};
  CHECK_THROWS_AS(weights.validate(), ConfigError);  // weights exceed mass
}
