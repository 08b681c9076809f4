#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <variant>

#include "mkv/lab.hpp"

using namespace mkv;

namespace {

Scenario scalar(const std::string& b, const std::string& sigma,
                const std::string& h, double lambda, double x0, double T) {
  Scenario s;
  s.name = "test";
  s.drift = {coeff(b)};
  s.diffusion = {coeff(sigma)};
  s.jump = {coeff(h)};
  s.jump_spec.total_mass = lambda;
  s.jump_spec.mark_law = DiracMark{{1.0}};
  s.initial = DeterministicInit{{x0}};
  s.horizon = T;
  return s;
}

// The short horizon keeps the coarse grids of these studies stable; the
// cubic drift explodes under delta >= 0.05 on long horizons.
AveragedPair bistable_pair(double horizon = 1.0) {
  return std::get<AveragedPair>(
      builtin_scenario("example_4_1", {{"T", horizon}}));
}

}  // namespace

TEST_CASE("slope fitting") {
  const double x[] = {1.0, 2.0, 3.0, 4.0};
  const double y[] = {2.0, 4.0, 6.0, 8.0};
  const SlopeFit fit = fit_slope(x, y);
  REQUIRE(fit.present);
  CHECK(fit.slope == doctest::Approx(2.0));
  CHECK(fit.std_error == doctest::Approx(0.0));

  const double single[] = {1.0};
  CHECK_FALSE(fit_slope(single, single).present);
  const double flat_x[] = {1.0, 1.0};
  const double flat_y[] = {0.0, 5.0};
  CHECK_FALSE(fit_slope(flat_x, flat_y).present);  // degenerate abscissa
}

TEST_CASE("plan validation") {
  ExperimentPlan plan;
  plan.kind = ExperimentKind::averaging;
  CHECK_THROWS_AS(plan.validate(), ConfigError);  // empty eps grid
  plan.eps_grid = {0.1, -0.1};
  CHECK_THROWS_AS(plan.validate(), ConfigError);
  plan.eps_grid = {0.1};
  CHECK_NOTHROW(plan.validate());

  plan.kind = ExperimentKind::refinement;
  plan.step_grid = {50, 120};  // not a doubling
  CHECK_THROWS_AS(plan.validate(), ConfigError);
  plan.step_grid = {50, 100, 200};
  CHECK_NOTHROW(plan.validate());
}

TEST_CASE("degenerate averaging pair has zero statistic for every eps") {
  AveragedPair pair = bistable_pair();
  pair.fast = pair.averaged;
  ExperimentPlan plan;
  plan.kind = ExperimentKind::averaging;
  plan.eps_grid = {0.1, 0.01};
  plan.particles = 8;
  plan.steps = 50;
  plan.replications = 2;
  const ExperimentReport report = run_averaging(pair, plan);
  REQUIRE(report.points.size() == 2);
  for (const auto& p : report.points) {
    CHECK(p.mean == 0.0);
    CHECK(p.replications == 2);
  }
}

TEST_CASE("averaging error shrinks with eps on the bistable example") {
  ExperimentPlan plan;
  plan.kind = ExperimentKind::averaging;
  plan.eps_grid = {0.1, 0.001};
  plan.particles = 50;
  plan.steps = 500;
  plan.replications = 4;
  plan.base_seed = 1;
  const ExperimentReport report = run_averaging(bistable_pair(), plan);
  REQUIRE(report.points.size() == 2);
  CHECK(report.points[0].grid_value == doctest::Approx(0.1));
  CHECK(report.points[1].mean < report.points[0].mean);
  CHECK(report.verdict);
}

TEST_CASE("reports are bit-reproducible from the base seed") {
  ExperimentPlan plan;
  plan.kind = ExperimentKind::averaging;
  plan.eps_grid = {0.05};
  plan.particles = 10;
  plan.steps = 50;
  plan.replications = 3;
  plan.base_seed = 77;
  const auto a = run_averaging(bistable_pair(), plan);
  const auto b = run_averaging(bistable_pair(), plan);
  CHECK(a.to_json() == b.to_json());
  CHECK(a.to_csv() == b.to_csv());
}

TEST_CASE("report serialization formats") {
  ExperimentPlan plan;
  plan.kind = ExperimentKind::averaging;
  plan.eps_grid = {0.1, 0.01};
  plan.particles = 4;
  plan.steps = 20;
  plan.replications = 2;
  const ExperimentReport report = run_averaging(bistable_pair(), plan);
  const std::string csv = report.to_csv();
  CHECK(csv.rfind("grid_value,statistic,stderr,replications\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);  // header + 2 rows
  const nlohmann::json j = report.to_json();
  CHECK(j.at("kind") == "averaging");
  CHECK(j.at("points").size() == 2);
  CHECK(j.contains("verdict_description"));
}

TEST_CASE("chaos study marks single-point grids as fit-absent") {
  const Scenario s = scalar("-x + mean()", "0.4", "0", 0.0, 1.0, 1.0);
  ExperimentPlan plan;
  plan.kind = ExperimentKind::chaos;
  plan.particle_grid = {32};
  plan.reference_particles = 256;
  plan.steps = 50;
  plan.replications = 2;
  const ExperimentReport report = run_chaos(s, plan);
  CHECK_FALSE(report.fit.present);
  CHECK(report.points.size() == 1);
}

TEST_CASE("chaos gap vanishes for non-interacting dynamics") {
  const Scenario s = scalar("-x", "0.4", "0", 0.0, 1.0, 1.0);
  ExperimentPlan plan;
  plan.kind = ExperimentKind::chaos;
  plan.particle_grid = {16, 64};
  plan.reference_particles = 256;
  plan.steps = 50;
  plan.replications = 2;
  const ExperimentReport report = run_chaos(s, plan);
  for (const auto& row : report.extra.at("sup_mean_sq_gap")) {
    CHECK(row.at("statistic").get<double>() == 0.0);
  }
}

TEST_CASE("chaos statistic shrinks with N on a mean-field scenario") {
  const Scenario s = scalar("-x + mean()", "0.4", "0", 0.0, 1.0, 1.0);
  ExperimentPlan plan;
  plan.kind = ExperimentKind::chaos;
  plan.particle_grid = {16, 64, 256};
  plan.reference_particles = 2048;
  plan.steps = 100;
  plan.replications = 4;
  plan.base_seed = 3;
  const ExperimentReport report = run_chaos(s, plan);
  REQUIRE(report.fit.present);
  CHECK(report.fit.slope < -0.2);
  CHECK(report.verdict);
}

TEST_CASE("refinement ratios are about one half for a deterministic flow") {
  const Scenario s = scalar("-x", "0", "0", 0.0, 1.0, 1.0);
  ExperimentPlan plan;
  plan.kind = ExperimentKind::refinement;
  plan.step_grid = {50, 100, 200, 400};
  plan.particles = 1;
  plan.replications = 1;
  plan.kappa = 2.0;
  const ExperimentReport report = run_refinement(s, plan);
  CHECK(report.verdict);
  for (const auto& r : report.extra.at("doubling_ratios")) {
    CHECK(r.get<double>() > 0.35);
    CHECK(r.get<double>() < 0.65);
  }
}

TEST_CASE("refinement distances decrease for the bistable example") {
  ExperimentPlan plan;
  plan.kind = ExperimentKind::refinement;
  plan.step_grid = {50, 100, 200};
  plan.particles = 32;
  plan.replications = 2;
  plan.base_seed = 5;
  plan.kappa = 2.0;
  const ExperimentReport report =
      run_refinement(bistable_pair().averaged, plan);
  CHECK(report.verdict);
  CHECK(report.points.front().mean > report.points.back().mean);
}

TEST_CASE("moment statistic stays bounded across refinements") {
  ExperimentPlan plan;
  plan.kind = ExperimentKind::moments;
  plan.step_grid = {50, 100, 200};
  plan.particles = 64;
  plan.replications = 2;
  plan.moment_order = 4.0;
  const ExperimentReport report =
      run_moment_and_holder(bistable_pair().averaged, plan);
  CHECK(report.verdict);
  CHECK(report.extra.at("spread_ratio").get<double>() < 2.0);
}

TEST_CASE("holder table matches the Brownian law") {
  const Scenario s = scalar("0", "1", "0", 0.0, 0.0, 1.0);
  ExperimentPlan plan;
  plan.kind = ExperimentKind::holder;
  plan.particles = 2000;
  plan.steps = 1000;
  plan.replications = 1;
  plan.kappa = 2.0;
  plan.holder_lags = {0.01, 0.1, 0.5};
  const ExperimentReport report = run_moment_and_holder(s, plan);
  REQUIRE(report.points.size() == 3);
  for (const auto& p : report.points) {
    CHECK(std::abs(p.mean - p.grid_value) / p.grid_value < 0.1);
  }
  REQUIRE(report.fit.present);
  CHECK(report.fit.slope == doctest::Approx(1.0).epsilon(0.05));
  CHECK(report.verdict);
}

TEST_CASE("holder table matches the compensated-Poisson variance") {
  // E|X(t)-X(s)|^2 = c^2 lambda |t-s| for pure compensated jumps h = c.
  const double c = 0.8, lambda = 2.0;
  const Scenario s = scalar("0", "0", "0.8", lambda, 0.0, 1.0);
  ExperimentPlan plan;
  plan.kind = ExperimentKind::holder;
  plan.particles = 4000;
  plan.steps = 500;
  plan.replications = 1;
  plan.kappa = 2.0;
  plan.holder_lags = {0.1, 0.5};
  const ExperimentReport report = run_moment_and_holder(s, plan);
  for (const auto& p : report.points) {
    const double exact = c * c * lambda * p.grid_value;
    CHECK(std::abs(p.mean - exact) / exact < 0.1);
  }
}

TEST_CASE("quadrupling replications roughly halves standard errors") {
  ExperimentPlan plan;
  plan.kind = ExperimentKind::averaging;
  plan.eps_grid = {0.01};
  plan.particles = 16;
  plan.steps = 200;
  plan.base_seed = 8;
  plan.replications = 8;
  const auto few = run_averaging(bistable_pair(), plan);
  plan.replications = 32;
  const auto many = run_averaging(bistable_pair(), plan);
  const double ratio = many.points[0].std_error / few.points[0].std_error;
  CHECK(ratio > 0.5 * 0.7);
  CHECK(ratio < 0.5 * 1.3);
}

TEST_CASE("common random numbers reduce variance versus independent noise") {
  const AveragedPair pair = bistable_pair();
  SolverConfig config;
  config.steps = 200;
  config.particles = 16;
  const std::size_t reps = 8;

  const auto sup_gap = [&](const Trajectory& a, const Trajectory& b) {
    double total = 0.0;
    for (std::size_t i = 0; i < a.particles; ++i) {
      double sup = 0.0;
      for (std::size_t k = 0; k < a.times.size(); ++k) {
        const double diff = a.value(k, i) - b.value(k, i);
        sup = std::max(sup, diff * diff);
      }
      total += sup;
    }
    return total / static_cast<double>(a.particles);
  };
  const auto variance = [](const std::vector<double>& v) {
    double mean = 0.0;
    for (double a : v) mean += a;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double a : v) ss += (a - mean) * (a - mean);
    return ss / static_cast<double>(v.size() - 1);
  };

  std::vector<double> coupled, independent;
  for (std::size_t j = 0; j < reps; ++j) {
    const auto [fast, avg] = simulate_coupled(pair, config, j);
    coupled.push_back(sup_gap(fast, avg));
    const Trajectory f2 = simulate(pair.fast, config, j);
    const Trajectory a2 = simulate(pair.averaged, config, j + 1000);
    independent.push_back(sup_gap(f2, a2));
  }
  CHECK(variance(coupled) < variance(independent));
}
