// svlab - minimal arithmetic expression grammar for initial-data densities
//
//   expr   := term (('+'|'-') term)*
//   term   := factor (('*'|'/') factor)*
//   factor := unary ('^' number)?
//   unary  := '-' unary | primary
//   primary:= number | var | fun '(' expr ')' | '(' expr ')'
//   var    := r | pr | l
//   fun    := exp | sqrt | log | sin | cos | bump | step
//
// bump(x) is the smooth compactly supported exp(x^2/(x^2-1)) on |x|<1,
// step(x) the C2 quintic ramp from 0 at x<=0 to 1 at x>=1. Evaluation is
// templated so gradients come from dual numbers.
#pragma once

#include <cctype>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "svlab/dual.hpp"
#include "svlab/util.hpp"

namespace svlab {

template <class T>
T bump_fn(const T& x) {
  using std::exp;
  const double v = value(x);
  if (v <= -1.0 || v >= 1.0) return T(0.0);
  return exp(x * x / (x * x - T(1.0)));
}

class Expression {
 public:
  explicit Expression(const std::string& src) : src_(src) {
    pos_ = 0;
    root_ = parse_expr();
    skip_ws();
    if (pos_ != src_.size())
      throw std::invalid_argument("expression: trailing input at '" + src_.substr(pos_) + "'");
  }

  template <class T>
  T eval(const T& r, const T& pr, const T& ell) const {
    const T vars[3] = {r, pr, ell};
    return eval_node(root_, vars);
  }

 private:
  enum class Kind { Num, Var, Add, Sub, Mul, Div, Pow, Neg, Fun };
  enum class Fun { Exp, Sqrt, Log, Sin, Cos, Bump, Step };
  struct Node {
    Kind kind;
    double num = 0.0;
    int var = 0;
    Fun fun = Fun::Exp;
    int a = -1, b = -1;
  };

  template <class T>
  T eval_node(int i, const T vars[3]) const {
    const Node& n = nodes_[i];
    using std::exp;
    using std::sqrt;
    using std::log;
    using std::sin;
    using std::cos;
    using std::pow;
    switch (n.kind) {
      case Kind::Num: return T(n.num);
      case Kind::Var: return vars[n.var];
      case Kind::Add: return eval_node<T>(n.a, vars) + eval_node<T>(n.b, vars);
      case Kind::Sub: return eval_node<T>(n.a, vars) - eval_node<T>(n.b, vars);
      case Kind::Mul: return eval_node<T>(n.a, vars) * eval_node<T>(n.b, vars);
      case Kind::Div: return eval_node<T>(n.a, vars) / eval_node<T>(n.b, vars);
      case Kind::Pow: return pow(eval_node<T>(n.a, vars), n.num);
      case Kind::Neg: return -eval_node<T>(n.a, vars);
      case Kind::Fun: {
        const T x = eval_node<T>(n.a, vars);
        switch (n.fun) {
          case Fun::Exp: return exp(x);
          case Fun::Sqrt: return sqrt(x);
          case Fun::Log: return log(x);
          case Fun::Sin: return sin(x);
          case Fun::Cos: return cos(x);
          case Fun::Bump: return bump_fn(x);
          case Fun::Step: return smoothstep5(x);
        }
      }
    }
    throw std::logic_error("expression: bad node");
  }

  void skip_ws() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }
  bool eat(char c) {
    skip_ws();
    if (pos_ < src_.size() && src_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }
  int push(Node n) {
    nodes_.push_back(n);
    return int(nodes_.size()) - 1;
  }

  int parse_expr() {
    int lhs = parse_term();
    for (;;) {
      if (eat('+')) lhs = push({Kind::Add, 0, 0, Fun::Exp, lhs, parse_term()});
      else if (eat('-')) lhs = push({Kind::Sub, 0, 0, Fun::Exp, lhs, parse_term()});
      else return lhs;
    }
  }
  int parse_term() {
    int lhs = parse_factor();
    for (;;) {
      if (eat('*')) lhs = push({Kind::Mul, 0, 0, Fun::Exp, lhs, parse_factor()});
      else if (eat('/')) lhs = push({Kind::Div, 0, 0, Fun::Exp, lhs, parse_factor()});
      else return lhs;
    }
  }
  int parse_factor() {
    int base = parse_unary();
    if (eat('^')) {
      skip_ws();
      const double e = parse_number_literal();
      Node n{Kind::Pow, e, 0, Fun::Exp, base, -1};
      return push(n);
    }
    return base;
  }
  int parse_unary() {
    if (eat('-')) return push({Kind::Neg, 0, 0, Fun::Exp, parse_unary(), -1});
    return parse_primary();
  }
  double parse_number_literal() {
    skip_ws();
    std::size_t end = pos_;
    const char* begin = src_.c_str() + pos_;
    char* out = nullptr;
    const double v = std::strtod(begin, &out);
    if (out == begin) throw std::invalid_argument("expression: number expected");
    end = pos_ + (out - begin);
    pos_ = end;
    return v;
  }
  int parse_primary() {
    skip_ws();
    if (pos_ >= src_.size()) throw std::invalid_argument("expression: unexpected end");
    const char c = src_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.')
      return push({Kind::Num, parse_number_literal(), 0, Fun::Exp, -1, -1});
    if (c == '(') {
      ++pos_;
      const int e = parse_expr();
      if (!eat(')')) throw std::invalid_argument("expression: ')' expected");
      return e;
    }
    // identifier
    std::size_t e = pos_;
    while (e < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[e])) || src_[e] == '_'))
      ++e;
    const std::string id = src_.substr(pos_, e - pos_);
    pos_ = e;
    if (id == "r") return push({Kind::Var, 0, 0, Fun::Exp, -1, -1});
    if (id == "pr") return push({Kind::Var, 0, 1, Fun::Exp, -1, -1});
    if (id == "l" || id == "ell") return push({Kind::Var, 0, 2, Fun::Exp, -1, -1});
    static const std::pair<const char*, Fun> funs[] = {
        {"exp", Fun::Exp},   {"sqrt", Fun::Sqrt}, {"log", Fun::Log},  {"sin", Fun::Sin},
        {"cos", Fun::Cos},   {"bump", Fun::Bump}, {"step", Fun::Step}};
    for (const auto& [name, f] : funs) {
      if (id == name) {
        if (!eat('(')) throw std::invalid_argument("expression: '(' expected after function");
        const int a = parse_expr();
        if (!eat(')')) throw std::invalid_argument("expression: ')' expected");
        return push({Kind::Fun, 0, 0, f, a, -1});
      }
    }
    throw std::invalid_argument("expression: unknown identifier '" + id + "'");
  }

  std::string src_;
  std::size_t pos_ = 0;
  std::vector<Node> nodes_;
  int root_ = -1;
};

}  // namespace svlab
