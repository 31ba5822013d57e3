#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "perpetual/dual.hpp"
#include "perpetual/errors.hpp"

namespace perpetual::expr {

using Params = std::map<std::string, double, std::less<>>;

enum class NodeKind { Constant, Variable, Parameter, Negate, Add, Sub, Mul, Div, Pow, Call };

enum class Builtin { Exp, Log, Sin, Cos, Tan, Sinh, Cosh, Tanh, Atan, Sqrt, Abs };

struct Node {
  NodeKind kind = NodeKind::Constant;
  double value = 0.0;   // Constant
  std::string name;     // Parameter
  Builtin fn = Builtin::Exp;
  std::shared_ptr<const Node> lhs;  // single operand of Negate / Call
  std::shared_ptr<const Node> rhs;
};

// Immutable expression tree in the variable x and named parameters.
class Expr {
 public:
  Expr() = default;
  explicit Expr(std::shared_ptr<const Node> root) : root_(std::move(root)) {}

  bool empty() const { return !root_; }
  const Node& root() const { return *root_; }

  Dual2 eval_dual2(double x, const Params& params) const;
  double eval(double x, const Params& params) const { return eval_dual2(x, params).v; }

  // Sorted, without duplicates.
  std::vector<std::string> parameters() const;
  bool depends_on_x() const;

  friend bool operator==(const Expr& a, const Expr& b);

 private:
  std::shared_ptr<const Node> root_;
};

// `parameters` lists the identifiers (besides x and the builtins) the source may use.
Expr parse(std::string_view source, std::span<const std::string> parameters = {});
Expr parse(std::string_view source, const Params& declared);

// Fully parenthesized text that parses back to the same tree.
std::string print(const Expr& e);

Dual2 eval_dual2(const Expr& e, double x, const Params& params);

std::optional<Builtin> builtin_from_name(std::string_view name);
std::string_view builtin_name(Builtin fn);

// Value-only postfix program with parameters bound and x-free subtrees folded.
// No domain checks: invalid operations produce NaN or Inf for the caller to detect.
class Compiled {
 public:
  Compiled() = default;
  Compiled(const Expr& e, const Params& params);

  double operator()(double x) const;
  bool is_constant() const { return constant_.has_value(); }
  double constant_value() const { return *constant_; }

  enum class Op : unsigned char { Const, X, Neg, Add, Sub, Mul, Div, PowInt, PowConst, Pow, Call };
  struct Instr {
    Op op;
    Builtin fn;
    int n;
    double c;
  };

 private:
  std::vector<Instr> code_;
  std::optional<double> constant_;
  int depth_ = 0;
};

}  // namespace perpetual::expr
