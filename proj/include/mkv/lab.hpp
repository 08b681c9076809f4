// Experiment orchestration: averaging-error studies, chaos-rate fits,
// refinement studies, moment/Hoelder probes, Monte Carlo replication.
#pragma once

#include <cstdint>
#include <json.hpp>
#include <string>
#include <vector>

#include "mkv/model.hpp"
#include "mkv/solver.hpp"

namespace mkv {

enum class ExperimentKind { averaging, chaos, refinement, moments, holder };

struct ExperimentPlan {
  ExperimentKind kind = ExperimentKind::averaging;
  std::vector<double> eps_grid;             // averaging
  std::vector<std::size_t> particle_grid;   // chaos: N values
  std::size_t reference_particles = 10000;  // chaos: M
  std::vector<std::size_t> step_grid;       // refinement / moments: n values
  std::size_t replications = 1;
  std::uint64_t base_seed = 0;
  std::size_t particles = 100;
  std::size_t steps = 1000;
  unsigned threads = 1;
  double kappa = 2.0;        // refinement / holder exponent
  double moment_order = 4.0; // moments statistic exponent
  std::vector<double> holder_lags = {0.01, 0.1, 0.5};

  void validate() const;
};

struct GridPointStat {
  double grid_value = 0.0;
  double mean = 0.0;
  double std_error = 0.0;  // absent (0) when replications < 2
  std::size_t replications = 0;
};

struct SlopeFit {
  bool present = false;
  double slope = 0.0;
  double std_error = 0.0;
};

struct ExperimentReport {
  std::string kind;
  std::vector<GridPointStat> points;
  SlopeFit fit;
  bool verdict = false;
  std::string verdict_description;
  nlohmann::json extra;  // experiment-specific tables
  std::uint64_t base_seed = 0;

  nlohmann::json to_json() const;
  // RFC-4180-style CSV with header grid_value,statistic,stderr,replications.
  std::string to_csv() const;
};

// Statistic per eps: estimate of E sup_t |X_eps(t) - Xbar(t)|^2 with the
// sup over grid times; coupled by common random numbers, particle pairs
// treated as path samples. Verdict: non-increasing along decreasing eps.
ExperimentReport run_averaging(const AveragedPair& pair,
                               const ExperimentPlan& plan);

// Statistics per N against an M-particle reference proxy: points carry
// sup_t W2^2, extra carries the per-particle sup-gap table; fit is the OLS
// slope of log statistic vs log N.
ExperimentReport run_chaos(const Scenario& scenario,
                           const ExperimentPlan& plan);

// Pathwise-coupled L^kappa sup-distance between consecutive grid
// refinements (n vs 2n, Brownian increments summed, jumps shared).
ExperimentReport run_refinement(const Scenario& scenario,
                                const ExperimentPlan& plan);

// kind == moments: E sup_t |X|^r across the step grid, verdict max/min < 2.
// kind == holder: E|X(t)-X(s)|^kappa per lag, with log-log slope fit.
ExperimentReport run_moment_and_holder(const Scenario& scenario,
                                       const ExperimentPlan& plan);

// Ordinary least squares of y on x with slope standard error.
SlopeFit fit_slope(std::span<const double> x, std::span<const double> y);

}  // namespace mkv
