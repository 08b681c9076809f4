#include "mkv/measure.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace mkv {

EmpiricalMeasure::EmpiricalMeasure(std::vector<double> atoms, std::size_t dim)
    : atoms_(std::move(atoms)), dim_(dim) {
  if (dim_ == 0 || atoms_.empty() || atoms_.size() % dim_ != 0) {
    throw std::invalid_argument("empirical measure: bad atom array shape");
  }
  count_ = atoms_.size() / dim_;
  for (double v : atoms_) {
    if (!std::isfinite(v)) {
      throw std::invalid_argument("empirical measure: non-finite atom");
    }
  }
}

double EmpiricalMeasure::mean(std::size_t component) const {
  if (component < 1 || component > dim_) {
    throw std::invalid_argument("empirical measure: component out of range");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < count_; ++i) s += atoms_[i * dim_ + component - 1];
  return s / static_cast<double>(count_);
}

double EmpiricalMeasure::raw_moment(double p, std::size_t component) const {
  if (component < 1 || component > dim_) {
    throw std::invalid_argument("empirical measure: component out of range");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < count_; ++i) {
    s += std::pow(std::abs(atoms_[i * dim_ + component - 1]), p);
  }
  return s / static_cast<double>(count_);
}

double EmpiricalMeasure::w2_to_dirac0() const {
  double s = 0.0;
  for (std::size_t i = 0; i < count_; ++i) {
    for (std::size_t c = 0; c < dim_; ++c) {
      const double v = atoms_[i * dim_ + c];
      s += v * v;
    }
  }
  return std::sqrt(s / static_cast<double>(count_));
}

double wasserstein_p_1d_sorted(std::span<const double> mu,
                               std::span<const double> nu, double p) {
  if (mu.empty() || nu.empty()) {
    throw std::invalid_argument("wasserstein: empty measure");
  }
  if (p < 1.0) throw std::invalid_argument("wasserstein: p must be >= 1");
  // Walk the merged quantile grid of the two inverse CDFs.
  const std::size_t K = mu.size(), L = nu.size();
  std::size_t i = 0, j = 0;
  double level = 0.0;
  double acc = 0.0;
  while (i < K && j < L) {
    const double next_i = static_cast<double>(i + 1) / K;
    const double next_j = static_cast<double>(j + 1) / L;
    const double next = std::min(next_i, next_j);
    acc += (next - level) * std::pow(std::abs(mu[i] - nu[j]), p);
    level = next;
    if (next_i <= next) ++i;
    if (next_j <= next) ++j;
  }
  return std::pow(acc, 1.0 / p);
}

double wasserstein_p_1d(std::span<const double> mu, std::span<const double> nu,
                        double p) {
  std::vector<double> a(mu.begin(), mu.end());
  std::vector<double> b(nu.begin(), nu.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  return wasserstein_p_1d_sorted(a, b, p);
}

double wasserstein_p_1d(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu,
                        double p) {
  if (mu.dim() != 1 || nu.dim() != 1) {
    throw std::invalid_argument("wasserstein_p_1d: measures must be 1-dimensional");
  }
  return wasserstein_p_1d(std::span<const double>(mu.data()),
                          std::span<const double>(nu.data()), p);
}

namespace {

// Jonker-Volgenant shortest augmenting path assignment, O(K^3).
// Returns the minimal total cost over perfect matchings.
double solve_assignment(const std::vector<double>& cost, std::size_t n) {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> match(n + 1, 0);  // column -> row (1-based)
  for (std::size_t row = 1; row <= n; ++row) {
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, false);
    std::vector<std::size_t> way(n + 1, 0);
    std::size_t j0 = 0;
    match[0] = row;
    do {
      used[j0] = true;
      const std::size_t i0 = match[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  double total = 0.0;
  for (std::size_t j = 1; j <= n; ++j) {
    total += cost[(match[j] - 1) * n + (j - 1)];
  }
  return total;
}

}  // namespace

double wasserstein_2_assignment(const EmpiricalMeasure& mu,
                                const EmpiricalMeasure& nu) {
  if (mu.dim() != nu.dim()) {
    throw std::invalid_argument("wasserstein_2_assignment: dimension mismatch");
  }
  if (mu.size() != nu.size()) {
    throw std::invalid_argument("wasserstein_2_assignment: atom count mismatch");
  }
  const std::size_t K = mu.size();
  if (K > 512) {
    throw std::invalid_argument("wasserstein_2_assignment: K over the 512 limit");
  }
  std::vector<double> cost(K * K);
  for (std::size_t i = 0; i < K; ++i) {
    for (std::size_t j = 0; j < K; ++j) {
      double d2 = 0.0;
      for (std::size_t c = 0; c < mu.dim(); ++c) {
        const double diff = mu.atom(i)[c] - nu.atom(j)[c];
        d2 += diff * diff;
      }
      cost[i * K + j] = d2;
    }
  }
  const double total = solve_assignment(cost, K);
  return std::sqrt(std::max(0.0, total) / static_cast<double>(K));
}

MeasureView::MeasureView(std::span<const double> states, std::size_t count,
                         std::size_t dim)
    : atoms_(states.begin(), states.end()), count_(count), dim_(dim) {
  means_.assign(dim_, 0.0);
  for (std::size_t i = 0; i < count_; ++i) {
    for (std::size_t c = 0; c < dim_; ++c) {
      const double v = atoms_[i * dim_ + c];
      means_[c] += v;
      mean_sq_norm_ += v * v;
    }
  }
  for (double& m : means_) m /= static_cast<double>(count_);
  mean_sq_norm_ /= static_cast<double>(count_);
}

double MeasureView::mean(std::size_t component) const {
  if (component < 1 || component > dim_) {
    throw EvalError("mean(): component out of range");
  }
  return means_[component - 1];
}

double MeasureView::raw_moment(double p, std::size_t component) const {
  if (component < 1 || component > dim_) {
    throw EvalError("mom(): component out of range");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < count_; ++i) {
    s += std::pow(std::abs(atoms_[i * dim_ + component - 1]), p);
  }
  return s / static_cast<double>(count_);
}

double MeasureView::w2_to_dirac0() const { return std::sqrt(mean_sq_norm_); }

}  // namespace mkv
