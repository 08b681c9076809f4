#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "mkv/expr.hpp"
#include "mkv/measure.hpp"
#include "mkv/rng.hpp"

using namespace mkv;

namespace {

double eval1(const std::string& src, double x, const MeasureHandle* mu = nullptr,
             double t = 0.0) {
  const double xs[] = {x};
  EvalContext ctx;
  ctx.t = t;
  ctx.x = xs;
  ctx.measure = mu;
  return evaluate(parse(src), ctx);
}

ExprPtr num(double v) {
  auto e = std::make_shared<Expr>();
  e->kind = ExprKind::number;
  e->number = v;
  return e;
}
ExprPtr var(const std::string& n) {
  auto e = std::make_shared<Expr>();
  e->kind = ExprKind::variable;
  e->name = n;
  return e;
}
ExprPtr node(ExprKind k, std::vector<ExprPtr> args) {
  auto e = std::make_shared<Expr>();
  e->kind = k;
  e->args = std::move(args);
  return e;
}
ExprPtr callf(Func f, std::vector<ExprPtr> args) {
  auto e = std::make_shared<Expr>();
  e->kind = ExprKind::call;
  e->func = f;
  e->args = std::move(args);
  return e;
}
ExprPtr mcall(MeasureFunc f, std::vector<ExprPtr> args) {
  auto e = std::make_shared<Expr>();
  e->kind = ExprKind::measure_call;
  e->mfunc = f;
  e->args = std::move(args);
  return e;
}

// Random AST generator for round-trip property tests.
ExprPtr random_ast(std::uint64_t seed, std::uint64_t& counter, int depth) {
  const auto pick = [&](std::uint64_t n) {
    return static_cast<std::uint64_t>(key_uniform({seed, 0, 7, counter++}) *
                                      static_cast<double>(n));
  };
  if (depth <= 0 || pick(10) < 3) {
    switch (pick(4)) {
      case 0: {
        // Positive literals only; negatives appear via the negate node.
        const double v = std::floor(key_uniform({seed, 1, 7, counter++}) * 1e4) /
                         16.0;
        return num(v);
      }
      case 1: return var("x");
      case 2: return var("t");
      default: return var("z");
    }
  }
  switch (pick(9)) {
    case 0: return node(ExprKind::add, {random_ast(seed, counter, depth - 1),
                                        random_ast(seed, counter, depth - 1)});
    case 1: return node(ExprKind::sub, {random_ast(seed, counter, depth - 1),
                                        random_ast(seed, counter, depth - 1)});
    case 2: return node(ExprKind::mul, {random_ast(seed, counter, depth - 1),
                                        random_ast(seed, counter, depth - 1)});
    case 3: return node(ExprKind::div, {random_ast(seed, counter, depth - 1),
                                        random_ast(seed, counter, depth - 1)});
    case 4: return node(ExprKind::pow, {random_ast(seed, counter, depth - 1),
                                        random_ast(seed, counter, depth - 1)});
    case 5: return node(ExprKind::negate, {random_ast(seed, counter, depth - 1)});
    case 6: {
      const Func fs[] = {Func::sin, Func::cos, Func::exp,  Func::log,
                         Func::sqrt, Func::abs, Func::cbrt};
      return callf(fs[pick(7)], {random_ast(seed, counter, depth - 1)});
    }
    case 7: return callf(Func::pow, {random_ast(seed, counter, depth - 1),
                                     random_ast(seed, counter, depth - 1)});
    default: {
      switch (pick(3)) {
        case 0: return mcall(MeasureFunc::mean, {});
        case 1: return mcall(MeasureFunc::mom, {num(2.0)});
        default: return mcall(MeasureFunc::w2d0, {});
      }
    }
  }
}

}  // namespace

TEST_CASE("parse produces the expected structure") {
  const ExprPtr e = parse("x - x^3");
  REQUIRE(e->kind == ExprKind::sub);
  CHECK(e->args[0]->kind == ExprKind::variable);
  CHECK(e->args[0]->name == "x");
  REQUIRE(e->args[1]->kind == ExprKind::pow);
  CHECK(e->args[1]->args[0]->name == "x");
  CHECK(e->args[1]->args[1]->number == doctest::Approx(3.0));

  // Averaged mean-field drift: (x - x^3) + mean().
  const ExprPtr drift = parse("(x - x^3) * (t/(1+t)) + mean()");
  REQUIRE(drift->kind == ExprKind::add);
  CHECK(drift->args[1]->kind == ExprKind::measure_call);
  CHECK(drift->args[1]->mfunc == MeasureFunc::mean);
  REQUIRE(drift->args[0]->kind == ExprKind::mul);
  CHECK(*drift->args[0]->args[0] == *parse("x - x^3"));
}

TEST_CASE("operator precedence and associativity") {
  CHECK(*parse("1 + 2 * 3") == *parse("1 + (2 * 3)"));
  CHECK(*parse("2 ^ 3 ^ 2") == *parse("2 ^ (3 ^ 2)"));  // right-assoc
  CHECK(*parse("1 - 2 - 3") == *parse("(1 - 2) - 3"));  // left-assoc
  CHECK(*parse("-x^2") == *parse("-(x^2)"));            // ^ binds tighter
  CHECK(eval1("2 ^ 3 ^ 2", 0.0) == doctest::Approx(512.0));
  CHECK(eval1("-2 ^ 2", 0.0) == doctest::Approx(-4.0));
}

TEST_CASE("parse errors carry positions") {
  CHECK_THROWS_AS(parse("sin("), ParseError);
  try {
    parse("sin(");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line == 1);
    CHECK(e.column >= 4);
  }
  CHECK_THROWS_AS(parse("foo(1)"), ParseError);       // unknown function
  CHECK_THROWS_AS(parse("bogus_var"), ParseError);    // unknown identifier
  CHECK_THROWS_AS(parse("sin(1, 2)"), ParseError);    // wrong arity
  CHECK_THROWS_AS(parse("mean(1, 2, 3)"), ParseError);
  CHECK_THROWS_AS(parse("1 +"), ParseError);
  CHECK_THROWS_AS(parse("1 @ 2"), ParseError);        // lexical error
}

TEST_CASE("evaluation examples") {
  CHECK(eval1("x - x^3", 2.0) == doctest::Approx(-6.0));
  CHECK(eval1("x*sin(log(1+x^2)^2)", 0.0) == doctest::Approx(0.0));
  const EmpiricalMeasure atoms = EmpiricalMeasure::from_1d({1.0, 2.0, 3.0});
  MeasureView mu(atoms.data(), 3, 1);
  CHECK(eval1("mean()", 0.0, &mu) == doctest::Approx(2.0));
  CHECK(eval1("mom(2)", 0.0, &mu) == doctest::Approx((1.0 + 4.0 + 9.0) / 3.0));
  CHECK(eval1("w2d0()", 0.0, &mu) ==
        doctest::Approx(std::sqrt((1.0 + 4.0 + 9.0) / 3.0)));
  CHECK(eval1("cbrt(x)", -8.0) == doctest::Approx(-2.0));
}

TEST_CASE("evaluation guards against silent domain errors") {
  CHECK_THROWS_AS(eval1("log(x)", -1.0), EvalError);
  CHECK_THROWS_AS(eval1("log(x)", 0.0), EvalError);
  CHECK_THROWS_AS(eval1("sqrt(x)", -1.0), EvalError);
  CHECK_THROWS_AS(eval1("1 / x", 0.0), EvalError);
  CHECK_THROWS_AS(eval1("mean()", 0.0, nullptr), EvalError);  // no measure
  CHECK_THROWS_AS(eval1("eps", 0.0), EvalError);              // unbound eps
}

TEST_CASE("free variable reporting") {
  CHECK(free_vars(*parse("3.0")).vars.empty());
  const auto fv = free_vars(*parse("x + t"));
  CHECK(fv.vars == std::set<std::string>{"x", "t"});
  CHECK_FALSE(fv.uses_measure);
  const auto fm = free_vars(*parse("mean() + z"));
  CHECK(fm.vars == std::set<std::string>{"z"});
  CHECK(fm.uses_measure);
}

TEST_CASE("pretty print round-trips canonical examples") {
  CHECK(*parse(pretty_print(*parse("x - x^3"))) == *parse("x - x^3"));
  CHECK(pretty_print(*parse("1.5")) == "1.5");
  const std::string printed = pretty_print(*parse("x - x ^ 3"));
  CHECK(printed.find('x') != std::string::npos);
  CHECK(printed.find('^') != std::string::npos);
}

TEST_CASE("pretty print round-trips 1000 random ASTs") {
  for (std::uint64_t i = 0; i < 1000; ++i) {
    std::uint64_t counter = 0;
    const ExprPtr e = random_ast(i, counter, 8);
    const std::string printed = pretty_print(*e);
    const ExprPtr back = parse(printed);
    CHECK_MESSAGE(*back == *e, "mismatch for: " << printed);
  }
}

TEST_CASE("evaluation is deterministic against a frozen measure") {
  const EmpiricalMeasure atoms =
      EmpiricalMeasure::from_1d({0.25, -1.5, 3.125, 0.875});
  MeasureView mu(atoms.data(), 4, 1);
  const ExprPtr e = parse("mean() * x + mom(3) - w2d0()");
  const double xs[] = {1.375};
  EvalContext ctx;
  ctx.x = xs;
  ctx.measure = &mu;
  const double first = evaluate(e, ctx);
  for (int i = 0; i < 10; ++i) CHECK(evaluate(e, ctx) == first);
}

TEST_CASE("component-indexed variables") {
  const double xs[] = {1.0, 2.0, 3.0};
  EvalContext ctx;
  ctx.x = xs;
  CHECK(evaluate(parse("x1 + x2 * x3"), ctx) == doctest::Approx(7.0));
  CHECK_THROWS_AS(evaluate(parse("x4"), ctx), EvalError);
  // Plain x requires a 1-d context.
  CHECK_THROWS_AS(evaluate(parse("x"), ctx), EvalError);
}
