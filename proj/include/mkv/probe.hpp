// Numeric probes for the structural conditions a scenario's coefficients
// are expected to satisfy, reporting estimated constants and witnesses.
//
// Sup-type constants are estimated by random sampling plus local refinement
// around the running maximum; the estimates are lower bounds on the true
// suprema.
#pragma once

#include <cstdint>
#include <json.hpp>
#include <vector>

#include "mkv/model.hpp"

namespace mkv {

struct ProbeConfig {
  double radius = 3.0;           // R: states sampled with |x| <= R
  std::size_t sample_count = 20000;
  std::size_t refine_rounds = 4;
  std::size_t measure_pool = 9;  // random empirical measures, K in {1,10,100}
  double tolerance = 0.05;       // slack for declared-bound checks
  std::uint64_t seed = 0;

  void validate() const {
    if (!(radius > 0.0)) throw ConfigError("probe: radius must be > 0");
    if (sample_count < 1) throw ConfigError("probe: sample_count must be >= 1");
  }
};

struct ProbeWitness {
  double t = 0.0;
  std::vector<double> x;
  std::vector<double> y;
  std::size_t measure_index = 0;
};

// Estimated one-sided local Lipschitz constants over |x| v |y| <= R:
// drift is sup <x-y, b(t,x,mu)-b(t,y,mu)> / |x-y|^2; diffusion and jump are
// the squared-difference analogues.
struct OneSidedLipschitzEstimate {
  double drift;
  double diffusion;
  double jump;
  ProbeWitness drift_witness;
};

// Estimated one-sided/global linear growth constants (per coefficient) and
// the fitted drift growth exponent kappa_hat.
struct GrowthEstimate {
  double drift;      // sup <x,b> / (1 + |x|^2 + W2^2(mu, delta_0))
  double diffusion;  // sup ||sigma||^2 / (...)
  double jump;       // sup int |h|^2 nu / (...)
  double kappa_hat;  // slope of log |b|^2 against log |x| at large |x|
};

OneSidedLipschitzEstimate probe_one_sided_lipschitz(const Scenario& scenario,
                                                    const ProbeConfig& config);
GrowthEstimate probe_growth(const Scenario& scenario,
                            const ProbeConfig& config);

// Time-averaged squared deviation of fast coefficients from the averaged
// ones: (1/t) int_0^t |coef(s,x,mu) - coef_avg(x,mu)|^2 ds, with the fast
// coefficient read in fast time (eps treated as 1).
struct AveragingRatePoint {
  double drift;
  double diffusion;
  double jump;
};
AveragingRatePoint probe_averaging_rate(const AveragedPair& pair, double t,
                                        std::span<const double> x,
                                        const MeasureHandle* measure,
                                        double quad_tol = 1e-12);

// Long-time average (1/t_max) int_0^{t_max} coef(s, x, mu) ds, a numerical
// candidate for the averaged coefficient. Returns one value per component.
std::vector<double> estimate_averaged_coefficient(
    CoefficientField field, const Scenario& fast_scenario, double t_max,
    std::span<const double> x, const MeasureHandle* measure,
    double quad_tol = 1e-10);

// Full probe run serialized for the verify command. `declared_bounds` maps
// probe names ("one_sided_drift", "one_sided_diffusion", "one_sided_jump",
// "growth_drift", "growth_diffusion", "growth_jump", "kappa") to bounds the
// estimates must not exceed (kappa: |kappa_hat - bound| <= 0.5).
struct ProbeReport {
  OneSidedLipschitzEstimate lipschitz;
  GrowthEstimate growth;
  std::vector<std::pair<std::string, bool>> bound_checks;
  bool all_passed = true;
};
ProbeReport run_probes(const Scenario& scenario, const ProbeConfig& config,
                       const std::map<std::string, double>& declared_bounds);
nlohmann::json probe_report_to_json(const ProbeReport& report,
                                    const ProbeConfig& config);

}  // namespace mkv
