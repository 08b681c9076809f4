// Coefficient expression DSL: parser, evaluator, printer.
//
// Grammar:
//   expr    := term (("+"|"-") term)* ;
//   term    := factor (("*"|"/") factor)* ;
//   factor  := ("-" factor) | power ;
//   power   := atom ("^" factor)? ;
//   atom    := NUMBER | IDENT | IDENT "(" args? ")" | "(" expr ")" ;
//
// Variables: t, eps, x (1-d) or x1..xd, z (1-d) or z1..zd.
// Functions: sin cos exp log sqrt abs cbrt pow(a,b).
// Measure functionals: mean([c]), mom(p[,c]), w2d0().
// cbrt is the odd real cube root, sign(x)|x|^{1/3}.
#pragma once

#include <cstddef>
#include <memory>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mkv {

struct ParseError : std::runtime_error {
  ParseError(const std::string& what, std::size_t line, std::size_t column)
      : std::runtime_error(what + " (line " + std::to_string(line) +
                           ", column " + std::to_string(column) + ")"),
        line(line),
        column(column) {}
  std::size_t line;
  std::size_t column;
};

struct EvalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Read-only view of a frozen empirical measure, as seen by coefficients.
class MeasureHandle {
 public:
  virtual ~MeasureHandle() = default;
  virtual double mean(std::size_t component) const = 0;        // 1-based
  virtual double raw_moment(double p, std::size_t component) const = 0;
  virtual double w2_to_dirac0() const = 0;
};

enum class ExprKind {
  number,
  variable,
  negate,
  add,
  sub,
  mul,
  div,
  pow,
  call,
  measure_call,
};

enum class Func { sin, cos, exp, log, sqrt, abs, cbrt, pow };
enum class MeasureFunc { mean, mom, w2d0 };

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
  ExprKind kind;
  double number = 0.0;         // number
  std::string name;            // variable
  Func func = Func::sin;       // call
  MeasureFunc mfunc = MeasureFunc::mean;  // measure_call
  std::vector<ExprPtr> args;   // operands / call arguments
};

bool operator==(const Expr& a, const Expr& b);

struct EvalContext {
  double t = 0.0;
  std::span<const double> x;
  std::span<const double> z;       // empty if no jump mark bound
  const double* eps = nullptr;     // null if unbound
  const MeasureHandle* measure = nullptr;
};

struct FreeVars {
  std::set<std::string> vars;
  bool uses_measure = false;
};

ExprPtr parse(const std::string& source);
double evaluate(const Expr& e, const EvalContext& ctx);
FreeVars free_vars(const Expr& e);
std::string pretty_print(const Expr& e);

inline double evaluate(const ExprPtr& e, const EvalContext& ctx) {
  return evaluate(*e, ctx);
}

}  // namespace mkv
