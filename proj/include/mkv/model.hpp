// Scenario definitions: coefficients, jump measure, initial law, metadata.
#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "mkv/expr.hpp"
#include "mkv/measure.hpp"
#include "mkv/noise.hpp"

namespace mkv {

// One scalar coefficient component: a DSL expression or a native closure.
struct Coefficient {
  ExprPtr expr;
  std::function<double(const EvalContext&)> native;

  double operator()(const EvalContext& ctx) const {
    return expr ? evaluate(*expr, ctx) : native(ctx);
  }
  bool empty() const { return !expr && !native; }
};

Coefficient coeff(const std::string& dsl);
Coefficient coeff_native(std::function<double(const EvalContext&)> fn);

struct DeterministicInit {
  std::vector<double> value;
};
struct GaussianInit {
  double mean = 0.0;
  double stddev = 1.0;
};
struct UniformInit {
  double low = 0.0;
  double high = 1.0;
};
using InitialLaw = std::variant<DeterministicInit, GaussianInit, UniformInit>;

struct Scenario {
  std::size_t dim_d = 1;
  std::size_t dim_m = 1;
  std::vector<Coefficient> drift;      // d entries
  std::vector<Coefficient> diffusion;  // d*m entries, row-major
  std::vector<Coefficient> jump;       // d entries
  JumpMeasureSpec jump_spec;
  InitialLaw initial = DeterministicInit{{0.0}};
  double horizon = 1.0;
  std::optional<double> eps;  // set for fast-oscillating scenarios
  double kappa = 2.0;
  double moment_order = 4.0;  // r in the initial-moment condition
  std::string name;

  void validate() const;

  // Initial state of one particle, keyed off (seed, particle).
  std::vector<double> sample_initial(std::uint64_t seed,
                                     std::uint64_t particle) const;
};

// Fast system plus its time-averaged counterpart, sharing dimensions,
// initial law, horizon, and jump measure.
struct AveragedPair {
  Scenario fast;
  Scenario averaged;
  // Optional closed-form rate functions bounding the time-averaged squared
  // coefficient deviations (drift, diffusion, jump; then the higher-order
  // jump rate).
  std::function<double(double)> rate_drift;
  std::function<double(double)> rate_diffusion;
  std::function<double(double)> rate_jump;
};

enum class CoefficientField { drift, diffusion, jump };

// Evaluates one coefficient field at (t, x, mu[, z]); throws EvalError with
// the coefficient named on non-finite values. `eps_override` replaces the
// scenario's eps (used by probes that work in fast time).
std::vector<double> eval_coefficient(CoefficientField field,
                                     const Scenario& scenario, double t,
                                     std::span<const double> x,
                                     const MeasureHandle* measure,
                                     std::span<const double> z = {},
                                     const double* eps_override = nullptr);

using ScenarioOrPair = std::variant<Scenario, AveragedPair>;

// Built-in scenarios:
//   example_4_1      (params x0, T, eps)       -> AveragedPair
//   remark_2_1_drift (params x0, T)            -> Scenario
//   linear_ou_jump   (params a, s, c, lambda, x0, T) -> Scenario
ScenarioOrPair builtin_scenario(const std::string& name,
                                const std::map<std::string, double>& params);

// Scenario config schema (see README): sections model / coefficients /
// jumps / initial.
Scenario scenario_from_json(const nlohmann::json& j);

}  // namespace mkv
