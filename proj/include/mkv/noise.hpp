// Brownian increments and finite-intensity compound-Poisson jump trains,
// reproducible from (seed, grid, N, spec) alone.
#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "mkv/rng.hpp"

namespace mkv {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Mark laws for the jump measure nu. nu has total mass `total_mass`
// (lambda); the mark distribution is nu / lambda.
struct DiracMark {
  std::vector<double> point;
};
struct DiscreteMark {
  // atoms with strictly positive weights; weights sum to total_mass
  std::vector<std::pair<std::vector<double>, double>> atoms;
};
struct GaussianMark {
  double mean = 0.0;
  double stddev = 1.0;
};

struct JumpMeasureSpec {
  double total_mass = 0.0;  // lambda = nu(U)
  std::variant<DiracMark, DiscreteMark, GaussianMark> mark_law =
      DiracMark{{1.0}};
  int quadrature_nodes = 32;  // Gauss-Hermite node count for gaussian marks

  // Dimension of the marks.
  std::size_t mark_dim() const;
  void validate() const;
};

// Integral of f over U against nu (not normalized): exact summation for
// dirac/discrete, Gauss-Hermite quadrature for gaussian marks.
std::vector<double> compensator_integral(
    const std::function<std::vector<double>(std::span<const double>)>& f,
    const JumpMeasureSpec& spec, std::size_t out_dim);

// Scalar convenience overload.
double compensator_integral_1d(const std::function<double(double)>& f,
                               const JumpMeasureSpec& spec);

struct Jump {
  double time = 0.0;
  std::vector<double> mark;
};

// Brownian increments for one particle over a grid: step k holds an
// m-vector with law N(0, (t_{k+1}-t_k) I). Pure function of the key.
std::vector<std::vector<double>> sample_brownian_increments(
    std::uint64_t seed, std::uint64_t particle, std::span<const double> grid,
    std::size_t m);

// Jump train on (0, T]: count ~ Poisson(lambda*T), times iid uniform then
// sorted, marks iid from mark_law / lambda.
std::vector<Jump> sample_jump_train(std::uint64_t seed, std::uint64_t particle,
                                    double horizon,
                                    const JumpMeasureSpec& spec);

// Materialized noise for N particles on a fixed grid. Regenerating from the
// same (seed, grid, N, spec) reproduces the path bit-exactly.
class NoisePath {
 public:
  NoisePath() = default;

  static NoisePath generate(std::uint64_t seed, std::vector<double> grid,
                            std::size_t particles, std::size_t m,
                            const JumpMeasureSpec& spec);

  const std::vector<double>& grid() const { return grid_; }
  std::size_t particles() const { return particles_; }
  std::size_t brownian_dim() const { return m_; }
  std::uint64_t seed() const { return seed_; }
  double horizon() const { return grid_.empty() ? 0.0 : grid_.back(); }
  std::size_t steps() const { return grid_.empty() ? 0 : grid_.size() - 1; }

  // m-vector increment of particle i over step k.
  std::span<const double> increment(std::size_t particle,
                                    std::size_t step) const {
    return {brownian_.data() + (particle * steps() + step) * m_, m_};
  }

  const std::vector<Jump>& jumps(std::size_t particle) const {
    return jumps_[particle];
  }

  // Halve the grid resolution: drops every second grid point, sums paired
  // Brownian increments, shares jump trains verbatim. Requires an even
  // number of steps. This is the coupling used by refinement studies.
  NoisePath coarsen() const;

 private:
  std::uint64_t seed_ = 0;
  std::vector<double> grid_;
  std::size_t particles_ = 0;
  std::size_t m_ = 0;
  std::vector<double> brownian_;  // [particle][step][component]
  std::vector<std::vector<Jump>> jumps_;
};

}  // namespace mkv
