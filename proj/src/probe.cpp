#include "mkv/probe.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mkv/quad.hpp"

namespace mkv {

namespace {

constexpr std::uint64_t kProbeParticle = 0;

enum class ProbeChannel : std::uint64_t {
  state = 100,
  state_pair = 101,
  time = 102,
  pool = 103,
  refine = 104,
};

double probe_uniform(std::uint64_t seed, ProbeChannel channel,
                     std::uint64_t index) {
  return key_uniform(StreamKey{
      seed, kProbeParticle,
      StreamKey::make_channel(StreamKind::initial,
                              static_cast<std::uint64_t>(channel)),
      index});
}

// Measure pool: empirical measures with atoms uniform in [-R, R]^d and
// K in {1, 10, 100}; a computable surrogate for "all mu in M_2".
std::vector<MeasureView> build_measure_pool(const ProbeConfig& config,
                                            std::size_t dim) {
  std::vector<MeasureView> pool;
  const std::size_t sizes[] = {1, 10, 100};
  std::uint64_t draw = 0;
  for (std::size_t p = 0; p < config.measure_pool; ++p) {
    const std::size_t K = sizes[p % 3];
    std::vector<double> atoms(K * dim);
    for (double& a : atoms) {
      a = config.radius *
          (2.0 * probe_uniform(config.seed, ProbeChannel::pool, draw++) - 1.0);
    }
    pool.emplace_back(atoms, K, dim);
  }
  return pool;
}

std::vector<double> sample_state(const ProbeConfig& config, std::size_t dim,
                                 ProbeChannel channel, std::uint64_t sample,
                                 std::uint64_t salt) {
  std::vector<double> x(dim);
  for (std::size_t c = 0; c < dim; ++c) {
    x[c] = config.radius *
           (2.0 * probe_uniform(config.seed, channel,
                                sample * 64 + salt * 8 + c) -
            1.0);
  }
  return x;
}

double norm_sq(std::span<const double> v) {
  double s = 0.0;
  for (double a : v) s += a * a;
  return s;
}

double jump_sq_difference(const Scenario& s, double t,
                          std::span<const double> x, std::span<const double> y,
                          const MeasureHandle* mu) {
  if (s.jump_spec.total_mass == 0.0) return 0.0;
  return compensator_integral(
      [&](std::span<const double> z) {
        const auto hx =
            eval_coefficient(CoefficientField::jump, s, t, x, mu, z);
        const auto hy =
            eval_coefficient(CoefficientField::jump, s, t, y, mu, z);
        std::vector<double> out(1, 0.0);
        for (std::size_t c = 0; c < hx.size(); ++c) {
          out[0] += (hx[c] - hy[c]) * (hx[c] - hy[c]);
        }
        return out;
      },
      s.jump_spec, 1)[0];
}

double jump_sq_norm(const Scenario& s, double t, std::span<const double> x,
                    const MeasureHandle* mu) {
  if (s.jump_spec.total_mass == 0.0) return 0.0;
  return compensator_integral(
      [&](std::span<const double> z) {
        const auto h = eval_coefficient(CoefficientField::jump, s, t, x, mu, z);
        return std::vector<double>{norm_sq(h)};
      },
      s.jump_spec, 1)[0];
}

}  // namespace

OneSidedLipschitzEstimate probe_one_sided_lipschitz(const Scenario& scenario,
                                                    const ProbeConfig& config) {
  config.validate();
  const std::size_t d = scenario.dim_d;
  const auto pool = build_measure_pool(config, d);
  const double one = 1.0;  // probes read fast coefficients in fast time

  OneSidedLipschitzEstimate est{
      -std::numeric_limits<double>::infinity(),
      -std::numeric_limits<double>::infinity(),
      -std::numeric_limits<double>::infinity(),
      {}};

  const auto consider = [&](double t, std::span<const double> x,
                            std::span<const double> y, std::size_t mu_index) {
    const MeasureHandle* mu = &pool[mu_index];
    double gap_sq = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      gap_sq += (x[c] - y[c]) * (x[c] - y[c]);
    }
    if (gap_sq < 1e-16 * config.radius * config.radius) return;

    const auto bx = eval_coefficient(CoefficientField::drift, scenario, t, x,
                                     mu, {}, &one);
    const auto by = eval_coefficient(CoefficientField::drift, scenario, t, y,
                                     mu, {}, &one);
    double inner = 0.0;
    for (std::size_t c = 0; c < d; ++c) inner += (x[c] - y[c]) * (bx[c] - by[c]);
    if (inner / gap_sq > est.drift) {
      est.drift = inner / gap_sq;
      est.drift_witness = {t,
                           {x.begin(), x.end()},
                           {y.begin(), y.end()},
                           mu_index};
    }

    const auto sx = eval_coefficient(CoefficientField::diffusion, scenario, t,
                                     x, mu, {}, &one);
    const auto sy = eval_coefficient(CoefficientField::diffusion, scenario, t,
                                     y, mu, {}, &one);
    double frob = 0.0;
    for (std::size_t c = 0; c < sx.size(); ++c) {
      frob += (sx[c] - sy[c]) * (sx[c] - sy[c]);
    }
    est.diffusion = std::max(est.diffusion, frob / gap_sq);

    est.jump = std::max(
        est.jump, jump_sq_difference(scenario, t, x, y, mu) / gap_sq);
  };

  for (std::uint64_t s = 0; s < config.sample_count; ++s) {
    const double t =
        scenario.horizon * probe_uniform(config.seed, ProbeChannel::time, s);
    const auto x = sample_state(config, d, ProbeChannel::state, s, 0);
    const auto y = sample_state(config, d, ProbeChannel::state_pair, s, 0);
    consider(t, x, y, s % pool.size());
  }

  // local refinement around the drift witness; shrinking perturbations
  double scale = 0.1 * config.radius;
  for (std::size_t round = 0; round < config.refine_rounds; ++round) {
    const ProbeWitness base = est.drift_witness;
    for (std::uint64_t s = 0; s < config.sample_count / 10 + 1; ++s) {
      std::vector<double> x = base.x;
      std::vector<double> y = base.y;
      for (std::size_t c = 0; c < d; ++c) {
        const std::uint64_t idx = (round * config.sample_count + s) * 2 * d;
        x[c] += scale * (2.0 * probe_uniform(config.seed, ProbeChannel::refine,
                                             idx + c) -
                         1.0);
        y[c] += scale * (2.0 * probe_uniform(config.seed, ProbeChannel::refine,
                                             idx + d + c) -
                         1.0);
        x[c] = std::clamp(x[c], -config.radius, config.radius);
        y[c] = std::clamp(y[c], -config.radius, config.radius);
      }
      consider(base.t, x, y, base.measure_index);
    }
    scale *= 0.3;
  }
  return est;
}

GrowthEstimate probe_growth(const Scenario& scenario,
                            const ProbeConfig& config) {
  config.validate();
  const std::size_t d = scenario.dim_d;
  const auto pool = build_measure_pool(config, d);
  const double one = 1.0;

  GrowthEstimate est{-std::numeric_limits<double>::infinity(),
                     -std::numeric_limits<double>::infinity(),
                     -std::numeric_limits<double>::infinity(), 0.0};

  for (std::uint64_t s = 0; s < config.sample_count; ++s) {
    const double t =
        scenario.horizon * probe_uniform(config.seed, ProbeChannel::time, s);
    const auto x = sample_state(config, d, ProbeChannel::state, s, 1);
    const MeasureHandle* mu = &pool[s % pool.size()];
    const double w2 = mu->w2_to_dirac0();
    const double denom = 1.0 + norm_sq(x) + w2 * w2;

    const auto b = eval_coefficient(CoefficientField::drift, scenario, t, x,
                                    mu, {}, &one);
    double inner = 0.0;
    for (std::size_t c = 0; c < d; ++c) inner += x[c] * b[c];
    est.drift = std::max(est.drift, inner / denom);

    const auto sigma = eval_coefficient(CoefficientField::diffusion, scenario,
                                        t, x, mu, {}, &one);
    est.diffusion = std::max(est.diffusion, norm_sq(sigma) / denom);
    est.jump = std::max(est.jump, jump_sq_norm(scenario, t, x, mu) / denom);
  }

  // growth exponent: OLS slope of log |b|^2 on log |x| for |x| in
  // [10, 1000], measure fixed at delta_0, worst case over a few times
  const MeasureView delta0(std::vector<double>(d, 0.0), 1, d);
  std::vector<double> logs_x, logs_b;
  const int points = 25;
  for (int i = 0; i < points; ++i) {
    const double radius =
        10.0 * std::pow(100.0, static_cast<double>(i) / (points - 1));
    std::vector<double> x(d, 0.0);
    x[0] = radius;
    double worst = 0.0;
    for (double t : {0.1 * scenario.horizon, 0.5 * scenario.horizon,
                     scenario.horizon}) {
      const auto b = eval_coefficient(CoefficientField::drift, scenario, t, x,
                                      &delta0, {}, &one);
      worst = std::max(worst, norm_sq(b));
    }
    if (worst > 0.0) {
      logs_x.push_back(std::log(radius));
      logs_b.push_back(std::log(worst));
    }
  }
  if (logs_x.size() >= 2) {
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    const double n = static_cast<double>(logs_x.size());
    for (std::size_t i = 0; i < logs_x.size(); ++i) {
      sx += logs_x[i];
      sy += logs_b[i];
      sxx += logs_x[i] * logs_x[i];
      sxy += logs_x[i] * logs_b[i];
    }
    est.kappa_hat = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  }
  return est;
}

AveragingRatePoint probe_averaging_rate(const AveragedPair& pair, double t,
                                        std::span<const double> x,
                                        const MeasureHandle* measure,
                                        double quad_tol) {
  const double one = 1.0;
  const auto avg_b = eval_coefficient(CoefficientField::drift, pair.averaged,
                                      0.0, x, measure);
  const auto avg_sigma = eval_coefficient(CoefficientField::diffusion,
                                          pair.averaged, 0.0, x, measure);
  AveragingRatePoint out{0.0, 0.0, 0.0};
  if (t == 0.0) return out;

  out.drift = integrate(
                  [&](double s) {
                    const auto b = eval_coefficient(CoefficientField::drift,
                                                    pair.fast, s, x, measure,
                                                    {}, &one);
                    double acc = 0.0;
                    for (std::size_t c = 0; c < b.size(); ++c) {
                      acc += (b[c] - avg_b[c]) * (b[c] - avg_b[c]);
                    }
                    return acc;
                  },
                  0.0, t, quad_tol) /
              t;
  out.diffusion =
      integrate(
          [&](double s) {
            const auto sig = eval_coefficient(CoefficientField::diffusion,
                                              pair.fast, s, x, measure, {},
                                              &one);
            double acc = 0.0;
            for (std::size_t c = 0; c < sig.size(); ++c) {
              acc += (sig[c] - avg_sigma[c]) * (sig[c] - avg_sigma[c]);
            }
            return acc;
          },
          0.0, t, quad_tol) /
      t;
  if (pair.fast.jump_spec.total_mass > 0.0) {
    out.jump = integrate(
                   [&](double s) {
                     return compensator_integral(
                         [&](std::span<const double> z) {
                           const auto hf = eval_coefficient(
                               CoefficientField::jump, pair.fast, s, x,
                               measure, z, &one);
                           const auto ha = eval_coefficient(
                               CoefficientField::jump, pair.averaged, 0.0, x,
                               measure, z);
                           double acc = 0.0;
                           for (std::size_t c = 0; c < hf.size(); ++c) {
                             acc += (hf[c] - ha[c]) * (hf[c] - ha[c]);
                           }
                           return std::vector<double>{acc};
                         },
                         pair.fast.jump_spec, 1)[0];
                   },
                   0.0, t, quad_tol) /
               t;
  }
  return out;
}

std::vector<double> estimate_averaged_coefficient(
    CoefficientField field, const Scenario& fast_scenario, double t_max,
    std::span<const double> x, const MeasureHandle* measure, double quad_tol) {
  const double one = 1.0;
  const std::size_t n =
      field == CoefficientField::diffusion
          ? fast_scenario.dim_d * fast_scenario.dim_m
          : fast_scenario.dim_d;
  std::vector<double> out(n);
  for (std::size_t c = 0; c < n; ++c) {
    out[c] = integrate(
                 [&](double s) {
                   return eval_coefficient(field, fast_scenario, s, x, measure,
                                           {}, &one)[c];
                 },
                 0.0, t_max, quad_tol) /
             t_max;
  }
  return out;
}

ProbeReport run_probes(const Scenario& scenario, const ProbeConfig& config,
                       const std::map<std::string, double>& declared_bounds) {
  ProbeReport report;
  report.lipschitz = probe_one_sided_lipschitz(scenario, config);
  report.growth = probe_growth(scenario, config);
  const auto check = [&](const std::string& name, double estimate) {
    auto it = declared_bounds.find(name);
    if (it == declared_bounds.end()) return;
    bool ok;
    if (name == "kappa") {
      ok = std::abs(estimate - it->second) <= 0.5;
    } else {
      ok = estimate <= it->second * (1.0 + config.tolerance) + config.tolerance;
    }
    report.bound_checks.emplace_back(name, ok);
    if (!ok) report.all_passed = false;
  };
  check("one_sided_drift", report.lipschitz.drift);
  check("one_sided_diffusion", report.lipschitz.diffusion);
  check("one_sided_jump", report.lipschitz.jump);
  check("growth_drift", report.growth.drift);
  check("growth_diffusion", report.growth.diffusion);
  check("growth_jump", report.growth.jump);
  check("kappa", report.growth.kappa_hat);
  return report;
}

nlohmann::json probe_report_to_json(const ProbeReport& report,
                                    const ProbeConfig& config) {
  nlohmann::json j;
  j["note"] = "sup estimates from random sampling; lower bounds on the true "
              "suprema (>= true value not guaranteed)";
  j["config"] = {{"radius", config.radius},
                 {"sample_count", config.sample_count},
                 {"seed", config.seed},
                 {"tolerance", config.tolerance}};
  j["one_sided_lipschitz"] = {
      {"drift", report.lipschitz.drift},
      {"diffusion", report.lipschitz.diffusion},
      {"jump", report.lipschitz.jump},
      {"drift_witness",
       {{"t", report.lipschitz.drift_witness.t},
        {"x", report.lipschitz.drift_witness.x},
        {"y", report.lipschitz.drift_witness.y},
        {"measure_index", report.lipschitz.drift_witness.measure_index}}}};
  j["growth"] = {{"drift", report.growth.drift},
                 {"diffusion", report.growth.diffusion},
                 {"jump", report.growth.jump},
                 {"kappa_hat", report.growth.kappa_hat}};
  nlohmann::json checks = nlohmann::json::array();
  for (const auto& [name, ok] : report.bound_checks) {
    checks.push_back({{"name", name}, {"passed", ok}});
  }
  j["bound_checks"] = checks;
  j["all_passed"] = report.all_passed;
  return j;
}

}  // namespace mkv
