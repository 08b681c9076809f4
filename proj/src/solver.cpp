#include "mkv/solver.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

namespace mkv {

std::vector<double> make_grid(double horizon, std::size_t steps) {
  std::vector<double> grid(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) {
    grid[k] = horizon * static_cast<double>(k) / static_cast<double>(steps);
  }
  grid.back() = horizon;
  return grid;
}

namespace {

void parallel_for(std::size_t count, unsigned threads,
                  const std::function<void(std::size_t, std::size_t)>& body) {
  if (threads <= 1 || count < 2) {
    body(0, count);
    return;
  }
  const unsigned workers = std::min<unsigned>(threads, count);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::vector<std::exception_ptr> errors(workers);
  const std::size_t chunk = (count + workers - 1) / workers;
  for (unsigned w = 0; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(count, begin + chunk);
    pool.emplace_back([&, w, begin, end] {
      try {
        body(begin, end);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// Updates particles [begin, end) of one step into `next`, reading the
// frozen measure and pre-step states only.
void update_range(const Scenario& scenario, const NoisePath& noise,
                  const Ensemble& ens, std::size_t k, std::size_t begin,
                  std::size_t end, std::vector<double>& next,
                  double divergence_limit) {
  const double t_left = noise.grid()[k];
  const double t_right = noise.grid()[k + 1];
  const double dt = t_right - t_left;
  const std::size_t d = scenario.dim_d;
  const std::size_t m = scenario.dim_m;
  const bool has_jumps = scenario.jump_spec.total_mass > 0.0;

  for (std::size_t i = begin; i < end; ++i) {
    const std::span<const double> x = ens.particle(i);
    std::vector<double> b, sigma;
    try {
      b = eval_coefficient(CoefficientField::drift, scenario, t_left, x,
                           &ens.frozen);
      sigma = eval_coefficient(CoefficientField::diffusion, scenario, t_left, x,
                               &ens.frozen);
    } catch (const EvalError& e) {
      throw DivergenceError(i, k,
                            std::string("coefficient failure at particle " +
                                        std::to_string(i) + ", step " +
                                        std::to_string(k) + ": ") +
                                e.what());
    }

    const std::span<const double> dw = noise.increment(i, k);
    for (std::size_t c = 0; c < d; ++c) {
      double v = x[c] + b[c] * dt;
      for (std::size_t j = 0; j < m; ++j) v += sigma[c * m + j] * dw[j];
      next[i * d + c] = v;
    }

    if (has_jumps) {
      // All jumps of the step use the pre-step state in h, and the
      // compensator is subtracted explicitly.
      const auto& train = noise.jumps(i);
      auto lo = std::upper_bound(
          train.begin(), train.end(), t_left,
          [](double t, const Jump& jmp) { return t < jmp.time; });
      auto hi = std::upper_bound(
          train.begin(), train.end(), t_right,
          [](double t, const Jump& jmp) { return t < jmp.time; });
      try {
        for (auto it = lo; it != hi; ++it) {
          const auto h = eval_coefficient(CoefficientField::jump, scenario,
                                          t_left, x, &ens.frozen, it->mark);
          for (std::size_t c = 0; c < d; ++c) next[i * d + c] += h[c];
        }
        const auto compensator = compensator_integral(
            [&](std::span<const double> z) {
              return eval_coefficient(CoefficientField::jump, scenario, t_left,
                                      x, &ens.frozen, z);
            },
            scenario.jump_spec, d);
        for (std::size_t c = 0; c < d; ++c) {
          next[i * d + c] -= dt * compensator[c];
        }
      } catch (const EvalError& e) {
        throw DivergenceError(i, k,
                              std::string("jump coefficient failure at particle " +
                                          std::to_string(i) + ", step " +
                                          std::to_string(k) + ": ") +
                                  e.what());
      }
    }

    for (std::size_t c = 0; c < d; ++c) {
      const double v = next[i * d + c];
      if (!std::isfinite(v) || std::abs(v) > divergence_limit) {
        throw DivergenceError(
            i, k,
            "state diverged at particle " + std::to_string(i) + ", step " +
                std::to_string(k) + " (|x| = " + std::to_string(std::abs(v)) +
                ")");
      }
    }
  }
}

}  // namespace

void step(Ensemble& ens, const Scenario& scenario, const NoisePath& noise,
          std::size_t k, unsigned threads, double divergence_limit) {
  std::vector<double> next(ens.states.size());
  parallel_for(ens.count, threads, [&](std::size_t begin, std::size_t end) {
    update_range(scenario, noise, ens, k, begin, end, next, divergence_limit);
  });
  ens.states = std::move(next);
  ens.time = noise.grid()[k + 1];
  ens.refreeze();
}

Simulation::Simulation(const Scenario& scenario, const NoisePath& noise,
                       std::uint64_t seed, std::size_t particles,
                       unsigned threads, double divergence_limit)
    : scenario_(&scenario),
      noise_(&noise),
      threads_(threads),
      divergence_limit_(divergence_limit) {
  const std::size_t n = particles == 0 ? noise.particles() : particles;
  if (n > noise.particles()) {
    throw ConfigError("simulation: more particles than noise streams");
  }
  ens_.time = noise.grid().front();
  ens_.count = n;
  ens_.dim = scenario.dim_d;
  ens_.states.resize(n * scenario.dim_d);
  for (std::size_t i = 0; i < n; ++i) {
    const auto x0 = scenario.sample_initial(seed, i);
    std::copy(x0.begin(), x0.end(), ens_.states.begin() + i * scenario.dim_d);
  }
  ens_.refreeze();
}

void Simulation::advance() {
  if (done()) throw ConfigError("simulation: already at the horizon");
  std::vector<double> next(ens_.states.size());
  parallel_for(ens_.count, threads_, [&](std::size_t begin, std::size_t end) {
    update_range(*scenario_, *noise_, ens_, k_, begin, end, next,
                 divergence_limit_);
  });
  ens_.states = std::move(next);
  ens_.time = noise_->grid()[k_ + 1];
  ++k_;
  if (!measure_overridden_) ens_.refreeze();
}

void Simulation::override_measure(MeasureView measure) {
  ens_.frozen = std::move(measure);
  measure_overridden_ = true;
}

namespace {

bool should_record(const SolverConfig& config, double time, std::size_t k,
                   std::size_t steps) {
  switch (config.record) {
    case RecordMode::full:
      return true;
    case RecordMode::terminal:
      return k == steps;
    case RecordMode::snapshots:
      for (double want : config.snapshot_times) {
        if (std::abs(want - time) <= 1e-12 * std::max(1.0, std::abs(want))) {
          return true;
        }
      }
      return false;
  }
  return true;
}

Trajectory record_run(const Scenario& scenario, const SolverConfig& config,
                      const NoisePath& noise, std::uint64_t seed) {
  Simulation sim(scenario, noise, seed, config.particles, config.threads,
                 config.divergence_limit);
  Trajectory out;
  out.particles = config.particles;
  out.dim = scenario.dim_d;
  out.seed = seed;
  out.scenario_name = scenario.name;
  out.steps = noise.steps();
  const auto maybe_record = [&](std::size_t k) {
    const Ensemble& e = sim.ensemble();
    if (should_record(config, e.time, k, noise.steps())) {
      out.times.push_back(e.time);
      out.states.insert(out.states.end(), e.states.begin(), e.states.end());
    }
  };
  maybe_record(0);
  while (!sim.done()) {
    sim.advance();
    maybe_record(sim.current_step());
  }
  return out;
}

}  // namespace

Trajectory simulate(const Scenario& scenario, const SolverConfig& config,
                    std::uint64_t seed) {
  config.validate();
  scenario.validate();
  const NoisePath noise =
      NoisePath::generate(seed, make_grid(scenario.horizon, config.steps),
                          config.particles, scenario.dim_m, scenario.jump_spec);
  return record_run(scenario, config, noise, seed);
}

Trajectory simulate_with_noise(const Scenario& scenario,
                               const SolverConfig& config,
                               const NoisePath& noise, std::uint64_t seed) {
  config.validate();
  scenario.validate();
  return record_run(scenario, config, noise, seed);
}

std::pair<Trajectory, Trajectory> simulate_coupled(const AveragedPair& pair,
                                                   const SolverConfig& config,
                                                   std::uint64_t seed) {
  config.validate();
  pair.fast.validate();
  pair.averaged.validate();
  if (pair.fast.dim_d != pair.averaged.dim_d ||
      pair.fast.dim_m != pair.averaged.dim_m) {
    throw ConfigError("coupled simulation: dimension mismatch in pair");
  }
  const NoisePath noise = NoisePath::generate(
      seed, make_grid(pair.fast.horizon, config.steps), config.particles,
      pair.fast.dim_m, pair.fast.jump_spec);
  return {record_run(pair.fast, config, noise, seed),
          record_run(pair.averaged, config, noise, seed)};
}

std::vector<ChaosGapStatistics> simulate_reference_coupled(
    const Scenario& scenario, std::span<const std::size_t> small_counts,
    std::size_t reference_count, const SolverConfig& config,
    std::uint64_t seed) {
  for (std::size_t n : small_counts) {
    if (reference_count < n) {
      throw ConfigError("chaos run: reference size M must be >= N");
    }
  }
  scenario.validate();
  const NoisePath noise = NoisePath::generate(
      seed, make_grid(scenario.horizon, config.steps), reference_count,
      scenario.dim_m, scenario.jump_spec);
  std::vector<Simulation> smalls;
  smalls.reserve(small_counts.size());
  for (std::size_t n : small_counts) {
    smalls.emplace_back(scenario, noise, seed, n, config.threads,
                        config.divergence_limit);
  }
  Simulation reference(scenario, noise, seed, reference_count, config.threads,
                       config.divergence_limit);

  const std::size_t d = scenario.dim_d;
  std::vector<ChaosGapStatistics> stats(small_counts.size());
  std::vector<double> sorted_small, sorted_ref;
  const auto accumulate = [&] {
    const Ensemble& er = reference.ensemble();
    if (d == 1) {
      sorted_ref.assign(er.states.begin(), er.states.end());
      std::sort(sorted_ref.begin(), sorted_ref.end());
    }
    for (std::size_t s = 0; s < smalls.size(); ++s) {
      const std::size_t small_count = small_counts[s];
      const Ensemble& es = smalls[s].ensemble();
      double gap = 0.0;
      for (std::size_t i = 0; i < small_count; ++i) {
        for (std::size_t c = 0; c < d; ++c) {
          const double diff = er.states[i * d + c] - es.states[i * d + c];
          gap += diff * diff;
        }
      }
      gap /= static_cast<double>(small_count);
      stats[s].sup_mean_sq_gap = std::max(stats[s].sup_mean_sq_gap, gap);
      if (d == 1) {
        sorted_small.assign(es.states.begin(), es.states.end());
        std::sort(sorted_small.begin(), sorted_small.end());
        const double w2 =
            wasserstein_p_1d_sorted(sorted_ref, sorted_small, 2.0);
        stats[s].sup_w2_sq = std::max(stats[s].sup_w2_sq, w2 * w2);
      }
    }
  };
  accumulate();
  while (!reference.done()) {
    for (Simulation& small : smalls) small.advance();
    reference.advance();
    accumulate();
  }
  return stats;
}

ChaosGapStatistics simulate_reference_coupled(const Scenario& scenario,
                                              std::size_t small_count,
                                              std::size_t reference_count,
                                              const SolverConfig& config,
                                              std::uint64_t seed) {
  const std::size_t counts[] = {small_count};
  return simulate_reference_coupled(scenario, counts, reference_count, config,
                                    seed)[0];
}

}  // namespace mkv
