#include "mkv/model.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace mkv {

namespace {

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string("(") + buf + ")";
}

double get_param(const std::map<std::string, double>& params,
                 const std::string& key, double fallback) {
  auto it = params.find(key);
  return it == params.end() ? fallback : it->second;
}

void check_component_vars(const Coefficient& c, const Scenario& s,
                          bool allow_mark, const char* field) {
  if (!c.expr) return;  // native closures are trusted
  for (const auto& v : free_vars(*c.expr).vars) {
    if (v == "t") continue;
    if (v == "eps") {
      if (!s.eps) {
        throw ConfigError(std::string(field) +
                          ": coefficient uses 'eps' but the scenario has none");
      }
      continue;
    }
    const bool is_x = v[0] == 'x';
    if (!is_x && !allow_mark) {
      throw ConfigError(std::string(field) +
                        ": jump mark variable '" + v + "' outside jump coefficient");
    }
    const std::size_t dim = is_x ? s.dim_d : s.jump_spec.mark_dim();
    const std::size_t index = v.size() == 1 ? 1 : std::stoul(v.substr(1));
    if (v.size() == 1 && dim != 1) {
      throw ConfigError(std::string(field) + ": variable '" + v +
                        "' requires dimension 1, use suffixed components");
    }
    if (index > dim) {
      throw ConfigError(std::string(field) + ": variable '" + v +
                        "' exceeds declared dimension");
    }
  }
}

}  // namespace

Coefficient coeff(const std::string& dsl) { return Coefficient{parse(dsl), {}}; }

Coefficient coeff_native(std::function<double(const EvalContext&)> fn) {
  return Coefficient{nullptr, std::move(fn)};
}

void Scenario::validate() const {
  if (!(horizon > 0.0)) throw ConfigError("scenario: horizon must be > 0");
  if (!(kappa >= 2.0)) throw ConfigError("scenario: kappa must be >= 2");
  if (!(moment_order >= std::max(kappa * kappa / 2.0, 4.0))) {
    throw ConfigError("scenario: r must satisfy r >= max(kappa^2/2, 4)");
  }
  if (eps && !(*eps > 0.0)) throw ConfigError("scenario: eps must be > 0");
  if (dim_d < 1 || dim_m < 1) throw ConfigError("scenario: dimensions must be >= 1");
  if (drift.size() != dim_d) throw ConfigError("scenario: drift needs d components");
  if (diffusion.size() != dim_d * dim_m) {
    throw ConfigError("scenario: diffusion needs d*m components");
  }
  if (jump.size() != dim_d) throw ConfigError("scenario: jump needs d components");
  jump_spec.validate();
  for (const auto& c : drift) check_component_vars(c, *this, false, "drift");
  for (const auto& c : diffusion) check_component_vars(c, *this, false, "diffusion");
  for (const auto& c : jump) check_component_vars(c, *this, true, "jump");
  if (const auto* d = std::get_if<DeterministicInit>(&initial)) {
    if (d->value.size() != dim_d) {
      throw ConfigError("scenario: initial value dimension mismatch");
    }
  }
}

std::vector<double> Scenario::sample_initial(std::uint64_t seed,
                                             std::uint64_t particle) const {
  std::vector<double> x(dim_d);
  if (const auto* d = std::get_if<DeterministicInit>(&initial)) {
    return d->value;
  }
  StreamKey key{seed, particle, StreamKey::make_channel(StreamKind::initial), 0};
  if (const auto* g = std::get_if<GaussianInit>(&initial)) {
    for (std::size_t c = 0; c < dim_d; ++c) {
      key.draw_index = c;
      x[c] = g->mean + g->stddev * key_normal(key);
    }
  } else {
    const auto& u = std::get<UniformInit>(initial);
    for (std::size_t c = 0; c < dim_d; ++c) {
      key.draw_index = c;
      x[c] = u.low + (u.high - u.low) * key_uniform(key);
    }
  }
  return x;
}

std::vector<double> eval_coefficient(CoefficientField field,
                                     const Scenario& scenario, double t,
                                     std::span<const double> x,
                                     const MeasureHandle* measure,
                                     std::span<const double> z,
                                     const double* eps_override) {
  const std::vector<Coefficient>* coeffs = nullptr;
  const char* field_name = "";
  switch (field) {
    case CoefficientField::drift:
      coeffs = &scenario.drift;
      field_name = "drift";
      break;
    case CoefficientField::diffusion:
      coeffs = &scenario.diffusion;
      field_name = "diffusion";
      break;
    case CoefficientField::jump:
      coeffs = &scenario.jump;
      field_name = "jump";
      break;
  }
  EvalContext ctx;
  ctx.t = t;
  ctx.x = x;
  ctx.z = z;
  ctx.measure = measure;
  const double* eps = eps_override ? eps_override
                                   : (scenario.eps ? &*scenario.eps : nullptr);
  ctx.eps = eps;
  std::vector<double> out(coeffs->size());
  for (std::size_t i = 0; i < coeffs->size(); ++i) {
    const double v = (*coeffs)[i](ctx);
    if (!std::isfinite(v)) {
      throw EvalError(std::string("non-finite ") + field_name + " component " +
                      std::to_string(i + 1) + " at t=" + std::to_string(t));
    }
    out[i] = v;
  }
  return out;
}

ScenarioOrPair builtin_scenario(const std::string& name,
                                const std::map<std::string, double>& params) {
  if (name == "example_4_1") {
    const double x0 = get_param(params, "x0", 1.0);
    const double T = get_param(params, "T", 10.0);
    const double eps = get_param(params, "eps", 0.01);
    if (!(eps > 0.0)) throw ConfigError("example_4_1: eps must be > 0");
    if (!(T > 0.0)) throw ConfigError("example_4_1: T must be > 0");

    AveragedPair pair;
    Scenario& fast = pair.fast;
    fast.name = "example_4_1";
    fast.dim_d = fast.dim_m = 1;
    fast.horizon = T;
    fast.eps = eps;
    fast.kappa = 6.0;
    fast.moment_order = 18.0;
    fast.initial = DeterministicInit{{x0}};
    fast.jump_spec = JumpMeasureSpec{1.0, DiracMark{{1.0}}};
    fast.drift = {coeff("(x - x^3) * ((t/eps) / (1 + t/eps)) + mean()")};
    fast.diffusion = {
        coeff("x * sin(log(1 + x^2)^2) * ((t/eps) / (2 + t/eps)) + mean()")};
    fast.jump = {
        coeff("x * sin(log(1 + x^2)^1.5) * (1 - exp(-(t/eps))) + mean()")};

    Scenario& avg = pair.averaged;
    avg = fast;
    avg.name = "example_4_1_averaged";
    avg.eps.reset();
    avg.drift = {coeff("(x - x^3) + mean()")};
    avg.diffusion = {coeff("x * sin(log(1 + x^2)^2) + mean()")};
    avg.jump = {coeff("x * sin(log(1 + x^2)^1.5) + mean()")};

    pair.rate_drift = [](double t) { return 1.0 / (1.0 + t); };
    pair.rate_diffusion = [](double t) { return 1.0 / (1.0 + t); };
    pair.rate_jump = [](double t) {
      return t == 0.0 ? 1.0 : (1.0 - std::exp(-2.0 * t)) / (2.0 * t);
    };
    pair.fast.validate();
    pair.averaged.validate();
    return pair;
  }

  if (name == "remark_2_1_drift") {
    const double x0 = get_param(params, "x0", 1.0);
    const double T = get_param(params, "T", 1.0);
    if (!(T > 0.0)) throw ConfigError("remark_2_1_drift: T must be > 0");
    Scenario s;
    s.name = "remark_2_1_drift";
    s.dim_d = s.dim_m = 1;
    s.horizon = T;
    s.kappa = 6.0;
    s.moment_order = 18.0;
    s.initial = DeterministicInit{{x0}};
    s.jump_spec = JumpMeasureSpec{0.0, DiracMark{{1.0}}};
    // cbrt is the odd real cube root, so the drift is defined on all of R.
    s.drift = {coeff("x^3 - cbrt(x) + t + mean()")};
    s.diffusion = {coeff("0")};
    s.jump = {coeff("0")};
    s.validate();
    return s;
  }

  if (name == "linear_ou_jump") {
    const double a = get_param(params, "a", -1.0);
    const double sdiff = get_param(params, "s", 0.5);
    const double c = get_param(params, "c", 0.2);
    const double lambda = get_param(params, "lambda", 1.0);
    const double x0 = get_param(params, "x0", 1.0);
    const double T = get_param(params, "T", 1.0);
    if (!(T > 0.0)) throw ConfigError("linear_ou_jump: T must be > 0");
    if (lambda < 0.0) throw ConfigError("linear_ou_jump: lambda must be >= 0");
    Scenario s;
    s.name = "linear_ou_jump";
    s.dim_d = s.dim_m = 1;
    s.horizon = T;
    s.kappa = 2.0;
    s.moment_order = 4.0;
    s.initial = DeterministicInit{{x0}};
    s.jump_spec = JumpMeasureSpec{lambda, DiracMark{{1.0}}};
    s.drift = {coeff(num(a) + " * x")};
    s.diffusion = {coeff(num(sdiff))};
    s.jump = {coeff(num(c))};
    s.validate();
    return s;
  }

  throw ConfigError("unknown builtin scenario '" + name + "'");
}

Scenario scenario_from_json(const nlohmann::json& j) {
  Scenario s;
  const auto& model = j.at("model");
  s.dim_d = model.value("d", 1);
  s.dim_m = model.value("m", 1);
  s.horizon = model.at("T").get<double>();
  if (model.contains("eps") && !model["eps"].is_null()) {
    s.eps = model["eps"].get<double>();
  }
  s.kappa = model.value("kappa", 2.0);
  s.moment_order = model.value("r", 4.0);
  s.name = model.value("name", "custom");

  auto load_coeffs = [](const nlohmann::json& spec, std::size_t want,
                        const char* field) {
    std::vector<Coefficient> out;
    if (spec.is_string()) {
      out.push_back(coeff(spec.get<std::string>()));
    } else {
      for (const auto& entry : spec) {
        if (entry.is_string()) {
          out.push_back(coeff(entry.get<std::string>()));
        } else {
          for (const auto& inner : entry) {
            out.push_back(coeff(inner.get<std::string>()));
          }
        }
      }
    }
    if (out.size() != want) {
      throw ConfigError(std::string("config: ") + field + " has " +
                        std::to_string(out.size()) + " components, expected " +
                        std::to_string(want));
    }
    return out;
  };
  const auto& coefs = j.at("coefficients");
  s.drift = load_coeffs(coefs.at("b"), s.dim_d, "b");
  s.diffusion = load_coeffs(coefs.at("sigma"), s.dim_d * s.dim_m, "sigma");
  s.jump = load_coeffs(coefs.at("h"), s.dim_d, "h");

  if (j.contains("jumps")) {
    const auto& jumps = j["jumps"];
    s.jump_spec.total_mass = jumps.value("mass", 0.0);
    const std::string law = jumps.value("mark_law", "dirac");
    const auto params = jumps.value("params", nlohmann::json::object());
    if (law == "dirac") {
      std::vector<double> point =
          params.value("point", std::vector<double>{1.0});
      s.jump_spec.mark_law = DiracMark{std::move(point)};
    } else if (law == "discrete") {
      DiscreteMark mark;
      for (const auto& atom : params.at("atoms")) {
        mark.atoms.emplace_back(atom.at("point").get<std::vector<double>>(),
                                atom.at("weight").get<double>());
      }
      s.jump_spec.mark_law = std::move(mark);
    } else if (law == "gaussian") {
      GaussianMark mark;
      mark.mean = params.value("mean", 0.0);
      mark.stddev = params.value("std", 1.0);
      s.jump_spec.mark_law = mark;
      s.jump_spec.quadrature_nodes = params.value("nodes", 32);
    } else {
      throw ConfigError("config: unknown mark_law '" + law + "'");
    }
  } else {
    s.jump_spec = JumpMeasureSpec{0.0, DiracMark{{1.0}}};
  }

  if (j.contains("initial")) {
    const auto& init = j["initial"];
    const std::string kind = init.value("kind", "deterministic");
    if (kind == "deterministic") {
      s.initial = DeterministicInit{init.at("value").get<std::vector<double>>()};
    } else if (kind == "gaussian") {
      s.initial = GaussianInit{init.value("mean", 0.0), init.value("std", 1.0)};
    } else if (kind == "uniform") {
      s.initial = UniformInit{init.value("low", 0.0), init.value("high", 1.0)};
    } else {
      throw ConfigError("config: unknown initial kind '" + kind + "'");
    }
  } else {
    s.initial = DeterministicInit{std::vector<double>(s.dim_d, 0.0)};
  }

  s.validate();
  return s;
}

}  // namespace mkv
