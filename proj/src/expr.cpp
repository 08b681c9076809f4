#include "mkv/expr.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>

namespace mkv {

namespace {

struct Token {
  enum Kind { number, ident, op, lparen, rparen, comma, end } kind;
  std::string text;
  double value = 0.0;
  std::size_t line = 1;
  std::size_t column = 1;
};

class Lexer {
 public:
  explicit Lexer(const std::string& src) : src_(src) { advance(); }

  const Token& peek() const { return current_; }

  Token take() {
    Token t = current_;
    advance();
    return t;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError(what, current_.line, current_.column);
  }

 private:
  void advance() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) {
      if (src_[pos_] == '\n') {
        ++line_;
        col_ = 1;
      } else {
        ++col_;
      }
      ++pos_;
    }
    current_.line = line_;
    current_.column = col_;
    if (pos_ >= src_.size()) {
      current_ = {Token::end, "", 0.0, line_, col_};
      return;
    }
    const char c = src_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      std::size_t used = 0;
      double v;
      try {
        v = std::stod(src_.substr(pos_), &used);
      } catch (const std::exception&) {
        throw ParseError("malformed number", line_, col_);
      }
      current_ = {Token::number, src_.substr(pos_, used), v, line_, col_};
      consume(used);
      return;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t n = 0;
      while (pos_ + n < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[pos_ + n])) ||
              src_[pos_ + n] == '_')) {
        ++n;
      }
      current_ = {Token::ident, src_.substr(pos_, n), 0.0, line_, col_};
      consume(n);
      return;
    }
    switch (c) {
      case '+': case '-': case '*': case '/': case '^':
        current_ = {Token::op, std::string(1, c), 0.0, line_, col_};
        break;
      case '(':
        current_ = {Token::lparen, "(", 0.0, line_, col_};
        break;
      case ')':
        current_ = {Token::rparen, ")", 0.0, line_, col_};
        break;
      case ',':
        current_ = {Token::comma, ",", 0.0, line_, col_};
        break;
      default:
        throw ParseError(std::string("unexpected character '") + c + "'", line_, col_);
    }
    consume(1);
  }

  void consume(std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
      if (src_[pos_] == '\n') {
        ++line_;
        col_ = 1;
      } else {
        ++col_;
      }
      ++pos_;
    }
  }

  const std::string& src_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
  std::size_t col_ = 1;
  Token current_;
};

ExprPtr make(Expr e) { return std::make_shared<const Expr>(std::move(e)); }

bool valid_var_name(const std::string& name) {
  if (name == "t" || name == "eps") return true;
  if (name.empty() || (name[0] != 'x' && name[0] != 'z')) return false;
  if (name.size() == 1) return true;
  if (name[1] == '0') return false;  // components are 1-based
  for (std::size_t i = 1; i < name.size(); ++i) {
    if (!std::isdigit(static_cast<unsigned char>(name[i]))) return false;
  }
  return true;
}

const std::map<std::string, Func>& function_table() {
  static const std::map<std::string, Func> table = {
      {"sin", Func::sin}, {"cos", Func::cos},   {"exp", Func::exp},
      {"log", Func::log}, {"sqrt", Func::sqrt}, {"abs", Func::abs},
      {"cbrt", Func::cbrt}, {"pow", Func::pow},
  };
  return table;
}

const std::map<std::string, MeasureFunc>& measure_table() {
  static const std::map<std::string, MeasureFunc> table = {
      {"mean", MeasureFunc::mean},
      {"mom", MeasureFunc::mom},
      {"w2d0", MeasureFunc::w2d0},
  };
  return table;
}

class Parser {
 public:
  explicit Parser(const std::string& src) : lex_(src) {}

  ExprPtr run() {
    ExprPtr e = expr();
    if (lex_.peek().kind != Token::end) lex_.fail("trailing input");
    return e;
  }

 private:
  ExprPtr expr() {
    ExprPtr lhs = term();
    while (lex_.peek().kind == Token::op &&
           (lex_.peek().text == "+" || lex_.peek().text == "-")) {
      const bool plus = lex_.take().text == "+";
      ExprPtr rhs = term();
      lhs = make({plus ? ExprKind::add : ExprKind::sub, 0.0, "", Func::sin,
                  MeasureFunc::mean, {lhs, rhs}});
    }
    return lhs;
  }

  ExprPtr term() {
    ExprPtr lhs = factor();
    while (lex_.peek().kind == Token::op &&
           (lex_.peek().text == "*" || lex_.peek().text == "/")) {
      const bool mul = lex_.take().text == "*";
      ExprPtr rhs = factor();
      lhs = make({mul ? ExprKind::mul : ExprKind::div, 0.0, "", Func::sin,
                  MeasureFunc::mean, {lhs, rhs}});
    }
    return lhs;
  }

  ExprPtr factor() {
    if (lex_.peek().kind == Token::op && lex_.peek().text == "-") {
      lex_.take();
      return make({ExprKind::negate, 0.0, "", Func::sin, MeasureFunc::mean,
                   {factor()}});
    }
    return power();
  }

  ExprPtr power() {
    ExprPtr base = atom();
    if (lex_.peek().kind == Token::op && lex_.peek().text == "^") {
      lex_.take();
      ExprPtr exponent = factor();  // right-associative
      return make({ExprKind::pow, 0.0, "", Func::sin, MeasureFunc::mean,
                   {base, exponent}});
    }
    return base;
  }

  ExprPtr atom() {
    const Token t = lex_.peek();
    if (t.kind == Token::number) {
      lex_.take();
      return make({ExprKind::number, t.value});
    }
    if (t.kind == Token::lparen) {
      lex_.take();
      ExprPtr e = expr();
      if (lex_.peek().kind != Token::rparen) lex_.fail("expected ')'");
      lex_.take();
      return e;
    }
    if (t.kind == Token::ident) {
      lex_.take();
      if (lex_.peek().kind == Token::lparen) {
        lex_.take();
        std::vector<ExprPtr> args;
        if (lex_.peek().kind != Token::rparen) {
          args.push_back(expr());
          while (lex_.peek().kind == Token::comma) {
            lex_.take();
            args.push_back(expr());
          }
        }
        if (lex_.peek().kind != Token::rparen) lex_.fail("expected ')'");
        lex_.take();
        return call(t, std::move(args));
      }
      if (!valid_var_name(t.text)) {
        throw ParseError("unknown identifier '" + t.text + "'", t.line, t.column);
      }
      return make({ExprKind::variable, 0.0, t.text});
    }
    lex_.fail("expected expression");
  }

  ExprPtr call(const Token& name, std::vector<ExprPtr> args) {
    if (auto it = function_table().find(name.text); it != function_table().end()) {
      const std::size_t want = it->second == Func::pow ? 2 : 1;
      if (args.size() != want) {
        throw ParseError("function '" + name.text + "' expects " +
                             std::to_string(want) + " argument(s)",
                         name.line, name.column);
      }
      return make({ExprKind::call, 0.0, "", it->second, MeasureFunc::mean,
                   std::move(args)});
    }
    if (auto it = measure_table().find(name.text); it != measure_table().end()) {
      bool ok = false;
      switch (it->second) {
        case MeasureFunc::mean: ok = args.size() <= 1; break;
        case MeasureFunc::mom: ok = args.size() == 1 || args.size() == 2; break;
        case MeasureFunc::w2d0: ok = args.empty(); break;
      }
      if (!ok) {
        throw ParseError("wrong arity for measure functional '" + name.text + "'",
                         name.line, name.column);
      }
      return make({ExprKind::measure_call, 0.0, "", Func::sin, it->second,
                   std::move(args)});
    }
    throw ParseError("unknown function '" + name.text + "'", name.line, name.column);
  }

  Lexer lex_;
};

double lookup_var(const std::string& name, const EvalContext& ctx) {
  if (name == "t") return ctx.t;
  if (name == "eps") {
    if (!ctx.eps) throw EvalError("unbound variable 'eps'");
    return *ctx.eps;
  }
  const bool is_x = name[0] == 'x';
  const std::span<const double>& vec = is_x ? ctx.x : ctx.z;
  std::size_t index = 0;
  if (name.size() == 1) {
    if (vec.size() != 1) {
      throw EvalError("variable '" + name + "' requires a 1-dimensional context");
    }
  } else {
    index = std::stoul(name.substr(1)) - 1;
  }
  if (index >= vec.size()) throw EvalError("unbound variable '" + name + "'");
  return vec[index];
}

double finite_or_throw(double v, const char* what) {
  if (!std::isfinite(v)) throw EvalError(std::string("non-finite result of ") + what);
  return v;
}

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  // trim to shortest representation that round-trips
  for (int prec = 1; prec < 17; ++prec) {
    char probe[64];
    std::snprintf(probe, sizeof(probe), "%.*g", prec, v);
    if (std::stod(probe) == v) return probe;
  }
  return buf;
}

}  // namespace

bool operator==(const Expr& a, const Expr& b) {
  if (a.kind != b.kind) return false;
  switch (a.kind) {
    case ExprKind::number:
      return a.number == b.number;
    case ExprKind::variable:
      return a.name == b.name;
    case ExprKind::call:
      if (a.func != b.func) return false;
      break;
    case ExprKind::measure_call:
      if (a.mfunc != b.mfunc) return false;
      break;
    default:
      break;
  }
  if (a.args.size() != b.args.size()) return false;
  for (std::size_t i = 0; i < a.args.size(); ++i) {
    if (!(*a.args[i] == *b.args[i])) return false;
  }
  return true;
}

ExprPtr parse(const std::string& source) { return Parser(source).run(); }

double evaluate(const Expr& e, const EvalContext& ctx) {
  switch (e.kind) {
    case ExprKind::number:
      return e.number;
    case ExprKind::variable:
      return lookup_var(e.name, ctx);
    case ExprKind::negate:
      return -evaluate(*e.args[0], ctx);
    case ExprKind::add:
      return finite_or_throw(evaluate(*e.args[0], ctx) + evaluate(*e.args[1], ctx), "+");
    case ExprKind::sub:
      return finite_or_throw(evaluate(*e.args[0], ctx) - evaluate(*e.args[1], ctx), "-");
    case ExprKind::mul:
      return finite_or_throw(evaluate(*e.args[0], ctx) * evaluate(*e.args[1], ctx), "*");
    case ExprKind::div: {
      const double denom = evaluate(*e.args[1], ctx);
      if (denom == 0.0) throw EvalError("division by zero");
      return finite_or_throw(evaluate(*e.args[0], ctx) / denom, "/");
    }
    case ExprKind::pow:
      return finite_or_throw(
          std::pow(evaluate(*e.args[0], ctx), evaluate(*e.args[1], ctx)), "^");
    case ExprKind::call: {
      const double a = evaluate(*e.args[0], ctx);
      switch (e.func) {
        case Func::sin: return std::sin(a);
        case Func::cos: return std::cos(a);
        case Func::exp: return finite_or_throw(std::exp(a), "exp");
        case Func::log:
          if (a <= 0.0) throw EvalError("log of non-positive argument");
          return std::log(a);
        case Func::sqrt:
          if (a < 0.0) throw EvalError("sqrt of negative argument");
          return std::sqrt(a);
        case Func::abs: return std::abs(a);
        case Func::cbrt: return std::cbrt(a);
        case Func::pow:
          return finite_or_throw(std::pow(a, evaluate(*e.args[1], ctx)), "pow");
      }
      throw EvalError("bad function node");
    }
    case ExprKind::measure_call: {
      if (!ctx.measure) throw EvalError("no measure bound in evaluation context");
      switch (e.mfunc) {
        case MeasureFunc::mean: {
          const std::size_t c =
              e.args.empty()
                  ? 1
                  : static_cast<std::size_t>(evaluate(*e.args[0], ctx));
          return ctx.measure->mean(c);
        }
        case MeasureFunc::mom: {
          const double p = evaluate(*e.args[0], ctx);
          const std::size_t c =
              e.args.size() < 2
                  ? 1
                  : static_cast<std::size_t>(evaluate(*e.args[1], ctx));
          return ctx.measure->raw_moment(p, c);
        }
        case MeasureFunc::w2d0:
          return ctx.measure->w2_to_dirac0();
      }
      throw EvalError("bad measure functional node");
    }
  }
  throw EvalError("bad expression node");
}

FreeVars free_vars(const Expr& e) {
  FreeVars out;
  const auto walk = [&out](const Expr& node, const auto& self) -> void {
    if (node.kind == ExprKind::variable) out.vars.insert(node.name);
    if (node.kind == ExprKind::measure_call) out.uses_measure = true;
    for (const auto& a : node.args) self(*a, self);
  };
  walk(e, walk);
  return out;
}

std::string pretty_print(const Expr& e) {
  switch (e.kind) {
    case ExprKind::number:
      return format_number(e.number);
    case ExprKind::variable:
      return e.name;
    case ExprKind::negate:
      return "(-" + pretty_print(*e.args[0]) + ")";
    case ExprKind::add:
      return "(" + pretty_print(*e.args[0]) + " + " + pretty_print(*e.args[1]) + ")";
    case ExprKind::sub:
      return "(" + pretty_print(*e.args[0]) + " - " + pretty_print(*e.args[1]) + ")";
    case ExprKind::mul:
      return "(" + pretty_print(*e.args[0]) + " * " + pretty_print(*e.args[1]) + ")";
    case ExprKind::div:
      return "(" + pretty_print(*e.args[0]) + " / " + pretty_print(*e.args[1]) + ")";
    case ExprKind::pow:
      return "(" + pretty_print(*e.args[0]) + " ^ " + pretty_print(*e.args[1]) + ")";
    case ExprKind::call: {
      static const char* names[] = {"sin", "cos", "exp", "log",
                                    "sqrt", "abs", "cbrt", "pow"};
      std::string s = names[static_cast<int>(e.func)];
      s += "(";
      for (std::size_t i = 0; i < e.args.size(); ++i) {
        if (i) s += ", ";
        s += pretty_print(*e.args[i]);
      }
      return s + ")";
    }
    case ExprKind::measure_call: {
      static const char* names[] = {"mean", "mom", "w2d0"};
      std::string s = names[static_cast<int>(e.mfunc)];
      s += "(";
      for (std::size_t i = 0; i < e.args.size(); ++i) {
        if (i) s += ", ";
        s += pretty_print(*e.args[i]);
      }
      return s + ")";
    }
  }
  return "?";
}

}  // namespace mkv
