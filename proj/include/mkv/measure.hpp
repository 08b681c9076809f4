// Empirical measures: moments and Wasserstein-p distances.
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mkv/expr.hpp"

namespace mkv {

// K uniformly weighted atoms in R^d, stored row-major.
class EmpiricalMeasure {
 public:
  EmpiricalMeasure(std::vector<double> atoms, std::size_t dim);

  // 1-d convenience constructor.
  static EmpiricalMeasure from_1d(std::vector<double> atoms) {
    return EmpiricalMeasure(std::move(atoms), 1);
  }

  std::size_t size() const { return count_; }
  std::size_t dim() const { return dim_; }
  std::span<const double> atom(std::size_t i) const {
    return {atoms_.data() + i * dim_, dim_};
  }
  const std::vector<double>& data() const { return atoms_; }

  double mean(std::size_t component) const;                   // 1-based
  double raw_moment(double p, std::size_t component) const;   // E|x_c|^p
  double w2_to_dirac0() const;  // sqrt of mean squared norm

 private:
  std::vector<double> atoms_;
  std::size_t count_;
  std::size_t dim_;
};

// Exact W_p between 1-d empirical measures via quantile coupling; handles
// unequal atom counts through the merged quantile grid.
double wasserstein_p_1d(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu,
                        double p);

// Same, operating directly on (unsorted) atom lists.
double wasserstein_p_1d(std::span<const double> mu, std::span<const double> nu,
                        double p);
// Variant taking already sorted atom lists (skips the internal sort).
double wasserstein_p_1d_sorted(std::span<const double> mu,
                               std::span<const double> nu, double p);

// Exact W_2 between equal-size measures in any dimension via minimum-cost
// perfect matching on the squared-distance matrix. K limited to 512.
double wasserstein_2_assignment(const EmpiricalMeasure& mu,
                                const EmpiricalMeasure& nu);

// Frozen snapshot of an ensemble's empirical measure; mean and second
// moment are cached at construction so repeated coefficient evaluations
// are bit-identical and O(1).
class MeasureView final : public MeasureHandle {
 public:
  MeasureView() = default;
  MeasureView(std::span<const double> states, std::size_t count, std::size_t dim);

  double mean(std::size_t component) const override;
  double raw_moment(double p, std::size_t component) const override;
  double w2_to_dirac0() const override;

 private:
  std::vector<double> atoms_;  // private copy, immutable for the step
  std::size_t count_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> means_;
  double mean_sq_norm_ = 0.0;
};

}  // namespace mkv
