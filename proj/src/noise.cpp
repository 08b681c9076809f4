#include "mkv/noise.hpp"

#include <algorithm>
#include <cmath>

namespace mkv {

namespace {

// Gauss-Hermite nodes/weights for integrals of the form
// int f(x) e^{-x^2} dx ~ sum w_i f(x_i). Newton iteration on H_n.
void gauss_hermite(int n, std::vector<double>& nodes,
                   std::vector<double>& weights) {
  nodes.assign(n, 0.0);
  weights.assign(n, 0.0);
  const double pi_quarter = 0.7511255444649425;  // pi^{-1/4}
  const int half = (n + 1) / 2;
  std::vector<double> roots;  // positive roots, descending
  double z = 0.0;
  for (int i = 0; i < half; ++i) {
    if (i == 0) {
      z = std::sqrt(2.0 * n + 1.0) -
          1.85575 * std::pow(2.0 * n + 1.0, -1.0 / 6.0);
    } else if (i == 1) {
      z -= 1.14 * std::pow(static_cast<double>(n), 0.426) / z;
    } else if (i == 2) {
      z = 1.86 * z - 0.86 * roots[0];
    } else if (i == 3) {
      z = 1.91 * z - 0.91 * roots[1];
    } else {
      z = 2.0 * z - roots[i - 2];
    }
    double pp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p1 = pi_quarter;
      double p2 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = z * std::sqrt(2.0 / (j + 1.0)) * p2 -
             std::sqrt(static_cast<double>(j) / (j + 1.0)) * p3;
      }
      pp = std::sqrt(2.0 * n) * p2;
      const double z1 = z;
      z = z1 - p1 / pp;
      if (std::abs(z - z1) < 1e-15) break;
    }
    roots.push_back(z);
    nodes[i] = z;
    nodes[n - 1 - i] = -z;
    weights[i] = 2.0 / (pp * pp);
    weights[n - 1 - i] = weights[i];
  }
}

}  // namespace

std::size_t JumpMeasureSpec::mark_dim() const {
  if (const auto* d = std::get_if<DiracMark>(&mark_law)) return d->point.size();
  if (const auto* d = std::get_if<DiscreteMark>(&mark_law)) {
    return d->atoms.empty() ? 1 : d->atoms.front().first.size();
  }
  return 1;  // gaussian marks are scalar
}

void JumpMeasureSpec::validate() const {
  if (!(total_mass >= 0.0) || !std::isfinite(total_mass)) {
    throw ConfigError("jump measure: total_mass must be finite and >= 0");
  }
  if (const auto* d = std::get_if<DiscreteMark>(&mark_law)) {
    double sum = 0.0;
    for (const auto& [atom, w] : d->atoms) {
      if (!(w > 0.0)) throw ConfigError("jump measure: discrete weights must be > 0");
      if (atom.size() != mark_dim()) {
        throw ConfigError("jump measure: inconsistent atom dimensions");
      }
      sum += w;
    }
    if (std::abs(sum - total_mass) > 1e-12 * std::max(1.0, total_mass)) {
      throw ConfigError("jump measure: discrete weights must sum to total_mass");
    }
  }
  if (const auto* g = std::get_if<GaussianMark>(&mark_law)) {
    if (!(g->stddev > 0.0)) throw ConfigError("jump measure: gaussian stddev must be > 0");
    if (quadrature_nodes < 1) throw ConfigError("jump measure: quadrature_nodes must be >= 1");
  }
}

std::vector<double> compensator_integral(
    const std::function<std::vector<double>(std::span<const double>)>& f,
    const JumpMeasureSpec& spec, std::size_t out_dim) {
  std::vector<double> acc(out_dim, 0.0);
  auto add = [&](std::span<const double> z, double weight) {
    const std::vector<double> v = f(z);
    for (std::size_t c = 0; c < out_dim; ++c) acc[c] += weight * v[c];
  };
  if (const auto* d = std::get_if<DiracMark>(&spec.mark_law)) {
    add(d->point, spec.total_mass);
  } else if (const auto* d = std::get_if<DiscreteMark>(&spec.mark_law)) {
    for (const auto& [atom, w] : d->atoms) add(atom, w);
  } else {
    const auto& g = std::get<GaussianMark>(spec.mark_law);
    std::vector<double> nodes, weights;
    gauss_hermite(spec.quadrature_nodes, nodes, weights);
    const double inv_sqrt_pi = 0.5641895835477563;
    for (int i = 0; i < spec.quadrature_nodes; ++i) {
      const double z = g.mean + g.stddev * std::sqrt(2.0) * nodes[i];
      add(std::span<const double>(&z, 1),
          spec.total_mass * weights[i] * inv_sqrt_pi);
    }
  }
  return acc;
}

double compensator_integral_1d(const std::function<double(double)>& f,
                               const JumpMeasureSpec& spec) {
  auto wrap = [&](std::span<const double> z) {
    return std::vector<double>{f(z[0])};
  };
  return compensator_integral(wrap, spec, 1)[0];
}

std::vector<std::vector<double>> sample_brownian_increments(
    std::uint64_t seed, std::uint64_t particle, std::span<const double> grid,
    std::size_t m) {
  if (grid.empty()) throw ConfigError("brownian sampling: empty grid");
  for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
    if (!(grid[k + 1] > grid[k])) {
      throw ConfigError("brownian sampling: grid must be strictly increasing");
    }
  }
  std::vector<std::vector<double>> out(grid.size() - 1);
  for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
    const double sd = std::sqrt(grid[k + 1] - grid[k]);
    out[k].resize(m);
    StreamKey key{seed, particle, StreamKey::make_channel(StreamKind::brownian, k), 0};
    for (std::size_t j = 0; j < m; ++j) {
      key.draw_index = j;
      out[k][j] = sd * key_normal(key);
    }
  }
  return out;
}

std::vector<Jump> sample_jump_train(std::uint64_t seed, std::uint64_t particle,
                                    double horizon,
                                    const JumpMeasureSpec& spec) {
  if (horizon < 0.0) throw ConfigError("jump sampling: negative horizon");
  spec.validate();
  if (spec.total_mass == 0.0 || horizon == 0.0) return {};

  const StreamKey count_key{seed, particle,
                            StreamKey::make_channel(StreamKind::jump_count), 0};
  const std::uint64_t count = key_poisson(count_key, spec.total_mass * horizon);

  std::vector<double> times(count);
  for (std::uint64_t j = 0; j < count; ++j) {
    const StreamKey tk{seed, particle,
                       StreamKey::make_channel(StreamKind::jump_time), j};
    times[j] = horizon * key_uniform(tk);  // uniform in (0, T]
  }
  std::sort(times.begin(), times.end());

  const std::size_t zd = spec.mark_dim();
  std::vector<Jump> train(count);
  for (std::uint64_t j = 0; j < count; ++j) {
    train[j].time = times[j];
    train[j].mark.resize(zd);
    if (const auto* d = std::get_if<DiracMark>(&spec.mark_law)) {
      train[j].mark = d->point;
    } else if (const auto* d = std::get_if<DiscreteMark>(&spec.mark_law)) {
      const StreamKey mk{seed, particle,
                         StreamKey::make_channel(StreamKind::jump_mark), j};
      double u = key_uniform(mk) * spec.total_mass;
      std::size_t pick = d->atoms.size() - 1;
      for (std::size_t a = 0; a < d->atoms.size(); ++a) {
        u -= d->atoms[a].second;
        if (u <= 0.0) {
          pick = a;
          break;
        }
      }
      train[j].mark = d->atoms[pick].first;
    } else {
      const auto& g = std::get<GaussianMark>(spec.mark_law);
      const StreamKey mk{seed, particle,
                         StreamKey::make_channel(StreamKind::jump_mark), j};
      train[j].mark[0] = g.mean + g.stddev * key_normal(mk);
    }
  }
  return train;
}

NoisePath NoisePath::generate(std::uint64_t seed, std::vector<double> grid,
                              std::size_t particles, std::size_t m,
                              const JumpMeasureSpec& spec) {
  if (grid.size() < 1) throw ConfigError("noise path: empty grid");
  NoisePath p;
  p.seed_ = seed;
  p.grid_ = std::move(grid);
  p.particles_ = particles;
  p.m_ = m;
  const std::size_t n = p.steps();
  p.brownian_.resize(particles * n * m);
  p.jumps_.resize(particles);
  const double T = p.horizon();
  for (std::size_t i = 0; i < particles; ++i) {
    const auto inc = sample_brownian_increments(seed, i, p.grid_, m);
    for (std::size_t k = 0; k < n; ++k) {
      for (std::size_t j = 0; j < m; ++j) {
        p.brownian_[(i * n + k) * m + j] = inc[k][j];
      }
    }
    p.jumps_[i] = sample_jump_train(seed, i, T, spec);
  }
  return p;
}

NoisePath NoisePath::coarsen() const {
  const std::size_t n = steps();
  if (n % 2 != 0 || n == 0) {
    throw ConfigError("noise path: coarsen requires an even, positive step count");
  }
  NoisePath p;
  p.seed_ = seed_;
  p.particles_ = particles_;
  p.m_ = m_;
  p.grid_.reserve(n / 2 + 1);
  for (std::size_t k = 0; k <= n; k += 2) p.grid_.push_back(grid_[k]);
  p.brownian_.resize(particles_ * (n / 2) * m_);
  for (std::size_t i = 0; i < particles_; ++i) {
    for (std::size_t k = 0; k < n / 2; ++k) {
      for (std::size_t j = 0; j < m_; ++j) {
        p.brownian_[(i * (n / 2) + k) * m_ + j] =
            brownian_[(i * n + 2 * k) * m_ + j] +
            brownian_[(i * n + 2 * k + 1) * m_ + j];
      }
    }
  }
  p.jumps_ = jumps_;
  return p;
}

}  // namespace mkv
