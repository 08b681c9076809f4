// Interacting N-particle solver with the empirical law frozen at the left
// endpoint of every step.
#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mkv/measure.hpp"
#include "mkv/model.hpp"
#include "mkv/noise.hpp"

namespace mkv {

struct DivergenceError : std::runtime_error {
  DivergenceError(std::size_t particle, std::size_t step,
                  const std::string& what)
      : std::runtime_error(what), particle(particle), step(step) {}
  std::size_t particle;
  std::size_t step;
};

enum class RecordMode { full, snapshots, terminal };

struct SolverConfig {
  std::size_t steps = 100;      // grid Delta = T / steps
  std::size_t particles = 1;
  RecordMode record = RecordMode::full;
  std::vector<double> snapshot_times;  // used when record == snapshots
  unsigned threads = 1;
  double divergence_limit = 1e12;

  void validate() const {
    if (steps < 1) throw ConfigError("solver: steps must be >= 1");
    if (particles < 1) throw ConfigError("solver: particles must be >= 1");
  }
};

// Particle states at one time plus the measure frozen at that time.
struct Ensemble {
  double time = 0.0;
  std::size_t count = 0;
  std::size_t dim = 0;
  std::vector<double> states;  // [particle][component]
  MeasureView frozen;

  std::span<const double> particle(std::size_t i) const {
    return {states.data() + i * dim, dim};
  }
  void refreeze() { frozen = MeasureView(states, count, dim); }
};

struct Trajectory {
  std::vector<double> times;
  std::size_t particles = 0;
  std::size_t dim = 0;
  std::vector<double> states;  // [time][particle][component]
  std::uint64_t seed = 0;
  std::string scenario_name;
  std::size_t steps = 0;

  std::span<const double> at(std::size_t time_index) const {
    return {states.data() + time_index * particles * dim, particles * dim};
  }
  double value(std::size_t time_index, std::size_t particle,
               std::size_t component = 0) const {
    return states[(time_index * particles + particle) * dim + component];
  }
};

// One Euler step over (t_k, t_{k+1}]: explicit drift/diffusion at the left
// endpoint, all jumps of the step applied with the pre-step state, explicit
// compensator subtraction. Rebuilds the frozen measure afterwards (unless
// an external measure source supplies it).
void step(Ensemble& ens, const Scenario& scenario, const NoisePath& noise,
          std::size_t k, unsigned threads = 1,
          double divergence_limit = 1e12);

// Incremental driver; lets experiment code run several systems in lockstep
// without materializing full trajectories.
class Simulation {
 public:
  // Uses the first `particles` streams of `noise` (defaults to all).
  Simulation(const Scenario& scenario, const NoisePath& noise,
             std::uint64_t seed, std::size_t particles = 0,
             unsigned threads = 1, double divergence_limit = 1e12);

  const Ensemble& ensemble() const { return ens_; }
  std::size_t current_step() const { return k_; }
  bool done() const { return k_ >= noise_->steps(); }
  void advance();

  // Replaces the frozen measure for subsequent steps (reference-law mode).
  void override_measure(MeasureView measure);

 private:
  const Scenario* scenario_;
  const NoisePath* noise_;
  Ensemble ens_;
  std::size_t k_ = 0;
  unsigned threads_;
  double divergence_limit_;
  bool measure_overridden_ = false;
};

// Equidistant grid 0..T with n steps.
std::vector<double> make_grid(double horizon, std::size_t steps);

Trajectory simulate(const Scenario& scenario, const SolverConfig& config,
                    std::uint64_t seed);

// As simulate(), but on caller-provided noise (refinement studies pass
// coarsened paths here).
Trajectory simulate_with_noise(const Scenario& scenario,
                               const SolverConfig& config,
                               const NoisePath& noise, std::uint64_t seed);

// Both systems consume the identical NoisePath; per-particle pairing is
// preserved (common random numbers).
std::pair<Trajectory, Trajectory> simulate_coupled(const AveragedPair& pair,
                                                   const SolverConfig& config,
                                                   std::uint64_t seed);

// Chaos-experiment statistics computed in lockstep between the N-particle
// system and an M-particle reference proxy for the true law (M >> N, first
// N noise streams shared).
struct ChaosGapStatistics {
  double sup_mean_sq_gap = 0.0;  // sup_t (1/N) sum_i |X_ref^i - X^{i,N}|^2
  double sup_w2_sq = 0.0;        // sup_t W2^2(reference empirical, N empirical)
};
ChaosGapStatistics simulate_reference_coupled(const Scenario& scenario,
                                              std::size_t small_count,
                                              std::size_t reference_count,
                                              const SolverConfig& config,
                                              std::uint64_t seed);

// Several N values against one shared reference run (one result per entry
// of `small_counts`); the reference system is simulated only once.
std::vector<ChaosGapStatistics> simulate_reference_coupled(
    const Scenario& scenario, std::span<const std::size_t> small_counts,
    std::size_t reference_count, const SolverConfig& config,
    std::uint64_t seed);

}  // namespace mkv
