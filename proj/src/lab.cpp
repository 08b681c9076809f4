#include "mkv/lab.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace mkv {

namespace {

struct SampleStats {
  double mean = 0.0;
  double std_error = 0.0;
};

SampleStats summarize(const std::vector<double>& values) {
  SampleStats s;
  const std::size_t n = values.size();
  if (n == 0) return s;
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) /
           static_cast<double>(n);
  if (n >= 2) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std_error = std::sqrt(ss / (static_cast<double>(n - 1) *
                                  static_cast<double>(n)));
  }
  return s;
}

// Mean over particles of sup_t |A_i(t) - B_i(t)|^2, trajectories on the
// same grid with the same particle count.
double mean_sup_sq_gap(const Trajectory& a, const Trajectory& b) {
  const std::size_t d = a.dim;
  double total = 0.0;
  for (std::size_t i = 0; i < a.particles; ++i) {
    double sup = 0.0;
    for (std::size_t k = 0; k < a.times.size(); ++k) {
      double gap = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        const double diff = a.value(k, i, c) - b.value(k, i, c);
        gap += diff * diff;
      }
      sup = std::max(sup, gap);
    }
    total += sup;
  }
  return total / static_cast<double>(a.particles);
}

// (mean over particles of sup over the coarse grid of |fine - coarse|^kappa)
// ^(1/kappa); the fine trajectory has exactly twice the coarse step count.
double lk_sup_distance(const Trajectory& fine, const Trajectory& coarse,
                       double kappa) {
  const std::size_t d = coarse.dim;
  double total = 0.0;
  for (std::size_t i = 0; i < coarse.particles; ++i) {
    double sup = 0.0;
    for (std::size_t k = 0; k < coarse.times.size(); ++k) {
      double gap = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        const double diff = fine.value(2 * k, i, c) - coarse.value(k, i, c);
        gap += diff * diff;
      }
      sup = std::max(sup, gap);
    }
    total += std::pow(sup, kappa / 2.0);
  }
  return std::pow(total / static_cast<double>(coarse.particles), 1.0 / kappa);
}

bool strictly_decreasing(const std::vector<GridPointStat>& points) {
  for (std::size_t i = 1; i < points.size(); ++i) {
    if (!(points[i].mean < points[i - 1].mean)) return false;
  }
  return true;
}

SlopeFit log_log_fit(const std::vector<GridPointStat>& points) {
  std::vector<double> lx, ly;
  for (const auto& p : points) {
    if (p.grid_value > 0.0 && p.mean > 0.0) {
      lx.push_back(std::log(p.grid_value));
      ly.push_back(std::log(p.mean));
    }
  }
  return fit_slope(lx, ly);
}

std::string format_sig(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void ExperimentPlan::validate() const {
  if (replications < 1) throw ConfigError("plan: replications must be >= 1");
  if (particles < 1) throw ConfigError("plan: particles must be >= 1");
  if (steps < 1) throw ConfigError("plan: steps must be >= 1");
  switch (kind) {
    case ExperimentKind::averaging:
      if (eps_grid.empty()) throw ConfigError("plan: eps_grid is empty");
      for (double e : eps_grid) {
        if (!(e > 0.0)) throw ConfigError("plan: eps values must be > 0");
      }
      break;
    case ExperimentKind::chaos:
      if (particle_grid.empty()) {
        throw ConfigError("plan: particle_grid is empty");
      }
      for (std::size_t n : particle_grid) {
        if (n < 1 || n > reference_particles) {
          throw ConfigError(
              "plan: particle_grid entries must lie in [1, reference size]");
        }
      }
      break;
    case ExperimentKind::refinement:
      if (step_grid.empty()) throw ConfigError("plan: step_grid is empty");
      for (std::size_t i = 1; i < step_grid.size(); ++i) {
        if (step_grid[i] != 2 * step_grid[i - 1]) {
          throw ConfigError("plan: step_grid must double at each entry");
        }
      }
      if (!(kappa > 0.0)) throw ConfigError("plan: kappa must be > 0");
      break;
    case ExperimentKind::moments:
      if (step_grid.empty()) throw ConfigError("plan: step_grid is empty");
      if (!(moment_order > 0.0)) {
        throw ConfigError("plan: moment_order must be > 0");
      }
      break;
    case ExperimentKind::holder:
      if (holder_lags.empty()) throw ConfigError("plan: holder_lags is empty");
      if (!(kappa > 0.0)) throw ConfigError("plan: kappa must be > 0");
      break;
  }
}

nlohmann::json ExperimentReport::to_json() const {
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& p : points) {
    pts.push_back({{"grid_value", p.grid_value},
                   {"statistic", p.mean},
                   {"stderr", p.std_error},
                   {"replications", p.replications}});
  }
  nlohmann::json j = {
      {"kind", kind},
      {"base_seed", base_seed},
      {"points", std::move(pts)},
      {"verdict", verdict},
      {"verdict_description", verdict_description},
  };
  if (fit.present) {
    j["fit"] = {{"slope", fit.slope}, {"stderr", fit.std_error}};
  }
  if (!extra.is_null()) j["extra"] = extra;
  return j;
}

std::string ExperimentReport::to_csv() const {
  std::string out = "grid_value,statistic,stderr,replications\n";
  for (const auto& p : points) {
    out += format_sig(p.grid_value) + ',' + format_sig(p.mean) + ',' +
           format_sig(p.std_error) + ',' + std::to_string(p.replications) +
           '\n';
  }
  return out;
}

SlopeFit fit_slope(std::span<const double> x, std::span<const double> y) {
  SlopeFit fit;
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n) return fit;
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 0.0)) return fit;
  fit.present = true;
  fit.slope = sxy / sxx;
  if (n > 2) {
    const double intercept = my - fit.slope * mx;
    double ssr = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = y[i] - intercept - fit.slope * x[i];
      ssr += r * r;
    }
    fit.std_error = std::sqrt(ssr / (static_cast<double>(n - 2) * sxx));
  }
  return fit;
}

ExperimentReport run_averaging(const AveragedPair& pair,
                               const ExperimentPlan& plan) {
  plan.validate();
  ExperimentReport report;
  report.kind = "averaging";
  report.base_seed = plan.base_seed;

  // Largest eps first, so the verdict reads "error shrinks as eps -> 0".
  std::vector<double> eps_sorted = plan.eps_grid;
  std::sort(eps_sorted.rbegin(), eps_sorted.rend());

  SolverConfig config;
  config.steps = plan.steps;
  config.particles = plan.particles;
  config.threads = plan.threads;

  for (double eps : eps_sorted) {
    AveragedPair p = pair;
    p.fast.eps = eps;
    std::vector<double> values;
    values.reserve(plan.replications);
    for (std::size_t j = 0; j < plan.replications; ++j) {
      const auto [fast, averaged] =
          simulate_coupled(p, config, plan.base_seed ^ j);
      values.push_back(mean_sup_sq_gap(fast, averaged));
    }
    const SampleStats s = summarize(values);
    report.points.push_back({eps, s.mean, s.std_error, plan.replications});
  }
  report.fit = log_log_fit(report.points);
  report.verdict = strictly_decreasing(report.points);
  report.verdict_description =
      "E sup_t |X_eps - Xbar|^2 strictly decreases as eps decreases";
  return report;
}

ExperimentReport run_chaos(const Scenario& scenario,
                           const ExperimentPlan& plan) {
  plan.validate();
  ExperimentReport report;
  report.kind = "chaos";
  report.base_seed = plan.base_seed;

  SolverConfig config;
  config.steps = plan.steps;
  config.threads = plan.threads;

  // One reference run per replication serves every N in the grid.
  std::vector<std::vector<double>> w2_values(plan.particle_grid.size());
  std::vector<std::vector<double>> gap_values(plan.particle_grid.size());
  for (std::size_t j = 0; j < plan.replications; ++j) {
    const std::vector<ChaosGapStatistics> stats = simulate_reference_coupled(
        scenario, plan.particle_grid, plan.reference_particles, config,
        plan.base_seed ^ j);
    for (std::size_t g = 0; g < plan.particle_grid.size(); ++g) {
      w2_values[g].push_back(stats[g].sup_w2_sq);
      gap_values[g].push_back(stats[g].sup_mean_sq_gap);
    }
  }
  nlohmann::json gap_table = nlohmann::json::array();
  for (std::size_t g = 0; g < plan.particle_grid.size(); ++g) {
    const double n = static_cast<double>(plan.particle_grid[g]);
    const SampleStats w2 = summarize(w2_values[g]);
    const SampleStats gap = summarize(gap_values[g]);
    report.points.push_back({n, w2.mean, w2.std_error, plan.replications});
    gap_table.push_back({{"grid_value", n},
                         {"statistic", gap.mean},
                         {"stderr", gap.std_error},
                         {"replications", plan.replications}});
  }
  report.extra = {{"sup_mean_sq_gap", std::move(gap_table)},
                  {"reference_particles", plan.reference_particles}};
  report.fit = log_log_fit(report.points);
  report.verdict = report.fit.present && report.fit.slope < 0.0;
  report.verdict_description =
      "sup_t W2^2 against the reference proxy shrinks with N "
      "(log-log slope reported in fit)";
  return report;
}

ExperimentReport run_refinement(const Scenario& scenario,
                                const ExperimentPlan& plan) {
  plan.validate();
  ExperimentReport report;
  report.kind = "refinement";
  report.base_seed = plan.base_seed;

  SolverConfig config;
  config.particles = plan.particles;
  config.threads = plan.threads;

  const std::size_t finest = 2 * plan.step_grid.back();
  std::vector<std::vector<double>> values(plan.step_grid.size());
  for (std::size_t j = 0; j < plan.replications; ++j) {
    const std::uint64_t seed = plan.base_seed ^ j;
    // One path at the finest resolution; every coarser grid is obtained by
    // summing paired increments, so all levels ride the same noise.
    std::vector<NoisePath> levels;
    levels.push_back(NoisePath::generate(
        seed, make_grid(scenario.horizon, finest), plan.particles,
        scenario.dim_m, scenario.jump_spec));
    while (levels.back().steps() > plan.step_grid.front()) {
      levels.push_back(levels.back().coarsen());
    }
    std::reverse(levels.begin(), levels.end());  // coarsest first

    std::vector<Trajectory> runs;
    runs.reserve(levels.size());
    for (const NoisePath& noise : levels) {
      config.steps = noise.steps();
      runs.push_back(simulate_with_noise(scenario, config, noise, seed));
    }
    for (std::size_t g = 0; g < plan.step_grid.size(); ++g) {
      values[g].push_back(lk_sup_distance(runs[g + 1], runs[g], plan.kappa));
    }
  }

  for (std::size_t g = 0; g < plan.step_grid.size(); ++g) {
    const SampleStats s = summarize(values[g]);
    report.points.push_back({static_cast<double>(plan.step_grid[g]), s.mean,
                             s.std_error, plan.replications});
  }
  nlohmann::json ratios = nlohmann::json::array();
  for (std::size_t g = 1; g < report.points.size(); ++g) {
    ratios.push_back(report.points[g].mean / report.points[g - 1].mean);
  }
  report.extra = {{"doubling_ratios", std::move(ratios)},
                  {"kappa", plan.kappa}};
  report.fit = log_log_fit(report.points);
  report.verdict = strictly_decreasing(report.points);
  report.verdict_description =
      "coupled L^kappa sup-distance between consecutive refinements "
      "strictly decreases as the grid is refined";
  return report;
}

ExperimentReport run_moment_and_holder(const Scenario& scenario,
                                       const ExperimentPlan& plan) {
  plan.validate();
  ExperimentReport report;
  report.base_seed = plan.base_seed;

  SolverConfig config;
  config.particles = plan.particles;
  config.threads = plan.threads;

  if (plan.kind == ExperimentKind::moments) {
    report.kind = "moments";
    const double r = plan.moment_order;
    for (std::size_t n : plan.step_grid) {
      config.steps = n;
      std::vector<double> values;
      for (std::size_t j = 0; j < plan.replications; ++j) {
        const Trajectory traj = simulate(scenario, config, plan.base_seed ^ j);
        double total = 0.0;
        for (std::size_t i = 0; i < traj.particles; ++i) {
          double sup = 0.0;
          for (std::size_t k = 0; k < traj.times.size(); ++k) {
            double nrm = 0.0;
            for (std::size_t c = 0; c < traj.dim; ++c) {
              nrm += traj.value(k, i, c) * traj.value(k, i, c);
            }
            sup = std::max(sup, nrm);
          }
          total += std::pow(sup, r / 2.0);
        }
        values.push_back(total / static_cast<double>(traj.particles));
      }
      const SampleStats s = summarize(values);
      report.points.push_back({static_cast<double>(n), s.mean, s.std_error,
                               plan.replications});
    }
    double lo = report.points.front().mean;
    double hi = lo;
    for (const auto& p : report.points) {
      lo = std::min(lo, p.mean);
      hi = std::max(hi, p.mean);
    }
    report.extra = {{"moment_order", r}, {"spread_ratio", hi / lo}};
    report.verdict = lo > 0.0 && hi / lo < 2.0;
    report.verdict_description =
        "E sup_t |X|^r stays within a factor 2 across step counts";
    return report;
  }

  report.kind = "holder";
  config.steps = plan.steps;
  const double dt = scenario.horizon / static_cast<double>(plan.steps);
  std::vector<std::size_t> lag_steps;
  for (double lag : plan.holder_lags) {
    const auto ls = static_cast<std::size_t>(std::llround(lag / dt));
    if (ls < 1 || ls > plan.steps) {
      throw ConfigError("plan: holder lag not representable on the grid");
    }
    lag_steps.push_back(ls);
  }

  std::vector<std::vector<double>> values(lag_steps.size());
  for (std::size_t j = 0; j < plan.replications; ++j) {
    const Trajectory traj = simulate(scenario, config, plan.base_seed ^ j);
    for (std::size_t g = 0; g < lag_steps.size(); ++g) {
      const std::size_t ls = lag_steps[g];
      double total = 0.0;
      std::size_t count = 0;
      for (std::size_t i = 0; i < traj.particles; ++i) {
        for (std::size_t k = 0; k + ls < traj.times.size(); ++k) {
          double gap = 0.0;
          for (std::size_t c = 0; c < traj.dim; ++c) {
            const double diff = traj.value(k + ls, i, c) - traj.value(k, i, c);
            gap += diff * diff;
          }
          total += std::pow(gap, plan.kappa / 2.0);
          ++count;
        }
      }
      values[g].push_back(total / static_cast<double>(count));
    }
  }
  for (std::size_t g = 0; g < lag_steps.size(); ++g) {
    const SampleStats s = summarize(values[g]);
    report.points.push_back({static_cast<double>(lag_steps[g]) * dt, s.mean,
                             s.std_error, plan.replications});
  }
  report.extra = {{"kappa", plan.kappa}};
  report.fit = log_log_fit(report.points);
  report.verdict = report.fit.present && report.fit.slope >= 0.9;
  report.verdict_description =
      "log-log slope of E|X(t)-X(s)|^kappa against the lag |t-s| "
      "is at least 1 - 0.1";
  return report;
}

}  // namespace mkv
