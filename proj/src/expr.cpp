#include "perpetual/expr.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <set>

#include "perpetual/errors.hpp"

namespace perpetual::expr {

namespace {

using NodePtr = std::shared_ptr<const Node>;

constexpr std::array<std::pair<std::string_view, Builtin>, 11> kBuiltins{{
    {"exp", Builtin::Exp},
    {"log", Builtin::Log},
    {"sin", Builtin::Sin},
    {"cos", Builtin::Cos},
    {"tan", Builtin::Tan},
    {"sinh", Builtin::Sinh},
    {"cosh", Builtin::Cosh},
    {"tanh", Builtin::Tanh},
    {"atan", Builtin::Atan},
    {"sqrt", Builtin::Sqrt},
    {"abs", Builtin::Abs},
}};

NodePtr make_constant(double v) {
  auto n = std::make_shared<Node>();
  n->kind = NodeKind::Constant;
  n->value = v;
  return n;
}

NodePtr make_unary(NodeKind kind, NodePtr a) {
  auto n = std::make_shared<Node>();
  n->kind = kind;
  n->lhs = std::move(a);
  return n;
}

NodePtr make_binary(NodeKind kind, NodePtr a, NodePtr b) {
  auto n = std::make_shared<Node>();
  n->kind = kind;
  n->lhs = std::move(a);
  n->rhs = std::move(b);
  return n;
}

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

class Parser {
 public:
  Parser(std::string_view src, std::span<const std::string> params) : src_(src), params_(params) {}

  NodePtr run() {
    skip_space();
    if (pos_ == src_.size()) throw ParseError(pos_, "empty expression");
    NodePtr e = expression();
    skip_space();
    if (pos_ != src_.size()) {
      if (src_[pos_] == ')') throw ParseError(pos_, "unbalanced ')'");
      throw ParseError(pos_, std::string("unexpected '") + src_[pos_] + "'");
    }
    return e;
  }

 private:
  void skip_space() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_space();
    if (pos_ < src_.size() && src_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  NodePtr expression() {
    NodePtr lhs = term();
    for (;;) {
      if (accept('+'))
        lhs = make_binary(NodeKind::Add, lhs, term());
      else if (accept('-'))
        lhs = make_binary(NodeKind::Sub, lhs, term());
      else
        return lhs;
    }
  }

  NodePtr term() {
    NodePtr lhs = unary();
    for (;;) {
      if (accept('*'))
        lhs = make_binary(NodeKind::Mul, lhs, unary());
      else if (accept('/'))
        lhs = make_binary(NodeKind::Div, lhs, unary());
      else
        return lhs;
    }
  }

  NodePtr unary() {
    if (accept('-')) return make_unary(NodeKind::Negate, unary());
    return power();
  }

  // Exponent is parsed as a unary so that x^-2 works and ^ groups to the right.
  NodePtr power() {
    NodePtr base = primary();
    if (accept('^')) return make_binary(NodeKind::Pow, base, unary());
    return base;
  }

  NodePtr primary() {
    skip_space();
    if (pos_ == src_.size()) throw ParseError(pos_, "expected operand");
    const char c = src_[pos_];
    if (c == '(') {
      const std::size_t open = pos_++;
      NodePtr e = expression();
      if (!accept(')')) {
        skip_space();
        if (pos_ == src_.size()) throw ParseError(open, "unbalanced '('");
        throw ParseError(pos_, "expected ')'");
      }
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (is_ident_start(c)) return identifier();
    if (c == ')') throw ParseError(pos_, "expected operand before ')'");
    throw ParseError(pos_, std::string("unexpected '") + c + "'");
  }

  NodePtr number() {
    const std::size_t start = pos_;
    while (pos_ < src_.size() && (std::isdigit(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '.')) ++pos_;
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      std::size_t p = pos_ + 1;
      if (p < src_.size() && (src_[p] == '+' || src_[p] == '-')) ++p;
      if (p < src_.size() && std::isdigit(static_cast<unsigned char>(src_[p]))) {
        pos_ = p;
        while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
      }
    }
    double v = 0.0;
    const char* first = src_.data() + start;
    const char* last = src_.data() + pos_;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec == std::errc::result_out_of_range) throw ParseError(start, "number out of range");
    if (ec != std::errc() || ptr != last) throw ParseError(start, "malformed number");
    return make_constant(v);
  }

  NodePtr identifier() {
    const std::size_t start = pos_;
    while (pos_ < src_.size() && is_ident_char(src_[pos_])) ++pos_;
    const std::string_view id = src_.substr(start, pos_ - start);
    if (auto fn = builtin_from_name(id)) {
      if (!accept('(')) throw ParseError(pos_, "expected '(' after '" + std::string(id) + "'");
      const std::size_t open = pos_ - 1;
      NodePtr arg = expression();
      if (!accept(')')) {
        skip_space();
        if (pos_ == src_.size()) throw ParseError(open, "unbalanced '('");
        throw ParseError(pos_, "expected ')'");
      }
      auto n = std::make_shared<Node>();
      n->kind = NodeKind::Call;
      n->fn = *fn;
      n->lhs = std::move(arg);
      return n;
    }
    if (id == "x") {
      auto n = std::make_shared<Node>();
      n->kind = NodeKind::Variable;
      return n;
    }
    if (std::find(params_.begin(), params_.end(), id) == params_.end())
      throw ParseError(start, "unknown identifier '" + std::string(id) + "'");
    auto n = std::make_shared<Node>();
    n->kind = NodeKind::Parameter;
    n->name = std::string(id);
    return n;
  }

  std::string_view src_;
  std::span<const std::string> params_;
  std::size_t pos_ = 0;
};

bool is_integer(double c) { return std::isfinite(c) && std::floor(c) == c; }

Dual2 apply_builtin(Builtin fn, const Dual2& u) {
  const double v = u.v;
  switch (fn) {
    case Builtin::Exp: {
      const double e = std::exp(v);
      return chain(u, e, e, e);
    }
    case Builtin::Log:
      if (!(v > 0.0)) throw DomainError("log of non-positive value");
      return chain(u, std::log(v), 1.0 / v, -1.0 / (v * v));
    case Builtin::Sin: {
      const double s = std::sin(v), c = std::cos(v);
      return chain(u, s, c, -s);
    }
    case Builtin::Cos: {
      const double s = std::sin(v), c = std::cos(v);
      return chain(u, c, -s, -c);
    }
    case Builtin::Tan: {
      const double t = std::tan(v);
      const double sec2 = 1.0 + t * t;
      return chain(u, t, sec2, 2.0 * t * sec2);
    }
    case Builtin::Sinh: {
      const double s = std::sinh(v), c = std::cosh(v);
      return chain(u, s, c, s);
    }
    case Builtin::Cosh: {
      const double s = std::sinh(v), c = std::cosh(v);
      return chain(u, c, s, c);
    }
    case Builtin::Tanh: {
      const double t = std::tanh(v);
      const double s2 = 1.0 - t * t;
      return chain(u, t, s2, -2.0 * t * s2);
    }
    case Builtin::Atan: {
      const double q = 1.0 / (1.0 + v * v);
      return chain(u, std::atan(v), q, -2.0 * v * q * q);
    }
    case Builtin::Sqrt: {
      if (v < 0.0) throw DomainError("sqrt of negative value");
      const double s = std::sqrt(v);
      if (v == 0.0) {
        if (u.d1 != 0.0 || u.d2 != 0.0) throw DomainError("sqrt not differentiable at 0");
        return {0.0, 0.0, 0.0};
      }
      return chain(u, s, 0.5 / s, -0.25 / (s * v));
    }
    case Builtin::Abs: {
      const double sg = v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
      return chain(u, std::abs(v), sg, 0.0);
    }
  }
  throw DomainError("unknown builtin");
}

Dual2 power(const Dual2& u, const Dual2& w) {
  if (w.d1 == 0.0 && w.d2 == 0.0) {
    const double c = w.v;
    if (c == 0.0) return {1.0, 0.0, 0.0};
    if (c == 1.0) return u;
    if (c == 2.0) return u * u;
    if (u.v < 0.0 && !is_integer(c)) throw DomainError("negative base with non-integer exponent");
    if (u.v == 0.0 && c < 0.0) throw DomainError("division by zero in power");
    const double v = std::pow(u.v, c);
    if (u.d1 == 0.0 && u.d2 == 0.0) return {v, 0.0, 0.0};
    const double h1 = c * std::pow(u.v, c - 1.0);
    const double h2 = (c == 1.0) ? 0.0 : c * (c - 1.0) * std::pow(u.v, c - 2.0);
    return chain(u, v, h1, h2);
  }
  if (!(u.v > 0.0)) throw DomainError("non-positive base with variable exponent");
  const Dual2 lg = apply_builtin(Builtin::Log, u);
  return apply_builtin(Builtin::Exp, w * lg);
}

Dual2 eval_node(const Node& n, double x, const Params& params) {
  Dual2 r;
  switch (n.kind) {
    case NodeKind::Constant:
      return Dual2::constant(n.value);
    case NodeKind::Variable:
      return Dual2::variable(x);
    case NodeKind::Parameter: {
      auto it = params.find(n.name);
      if (it == params.end()) throw UnboundParameter(n.name);
      return Dual2::constant(it->second);
    }
    case NodeKind::Negate:
      return -eval_node(*n.lhs, x, params);
    case NodeKind::Add:
      r = eval_node(*n.lhs, x, params) + eval_node(*n.rhs, x, params);
      break;
    case NodeKind::Sub:
      r = eval_node(*n.lhs, x, params) - eval_node(*n.rhs, x, params);
      break;
    case NodeKind::Mul:
      r = eval_node(*n.lhs, x, params) * eval_node(*n.rhs, x, params);
      break;
    case NodeKind::Div: {
      const Dual2 a = eval_node(*n.lhs, x, params);
      const Dual2 b = eval_node(*n.rhs, x, params);
      if (b.v == 0.0) throw DomainError("division by zero");
      r = a / b;
      break;
    }
    case NodeKind::Pow:
      r = power(eval_node(*n.lhs, x, params), eval_node(*n.rhs, x, params));
      break;
    case NodeKind::Call:
      r = apply_builtin(n.fn, eval_node(*n.lhs, x, params));
      break;
  }
  if (!std::isfinite(r.v) || !std::isfinite(r.d1) || !std::isfinite(r.d2))
    throw DomainError("non-finite value at x = " + std::to_string(x));
  return r;
}

bool same(const Node& a, const Node& b) {
  if (a.kind != b.kind) return false;
  switch (a.kind) {
    case NodeKind::Constant:
      return a.value == b.value || (std::isnan(a.value) && std::isnan(b.value));
    case NodeKind::Variable:
      return true;
    case NodeKind::Parameter:
      return a.name == b.name;
    case NodeKind::Negate:
      return same(*a.lhs, *b.lhs);
    case NodeKind::Call:
      return a.fn == b.fn && same(*a.lhs, *b.lhs);
    default:
      return same(*a.lhs, *b.lhs) && same(*a.rhs, *b.rhs);
  }
}

void collect_params(const Node& n, std::set<std::string>& out) {
  if (n.kind == NodeKind::Parameter) out.insert(n.name);
  if (n.lhs) collect_params(*n.lhs, out);
  if (n.rhs) collect_params(*n.rhs, out);
}

bool uses_x(const Node& n) {
  if (n.kind == NodeKind::Variable) return true;
  return (n.lhs && uses_x(*n.lhs)) || (n.rhs && uses_x(*n.rhs));
}

void print_node(const Node& n, std::string& out) {
  switch (n.kind) {
    case NodeKind::Constant: {
      std::array<char, 64> buf{};
      auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), n.value);
      out.append(buf.data(), ptr);
      return;
    }
    case NodeKind::Variable:
      out += 'x';
      return;
    case NodeKind::Parameter:
      out += n.name;
      return;
    case NodeKind::Negate:
      out += "(-";
      print_node(*n.lhs, out);
      out += ')';
      return;
    case NodeKind::Call:
      out += builtin_name(n.fn);
      out += '(';
      print_node(*n.lhs, out);
      out += ')';
      return;
    default:
      break;
  }
  const char* op = n.kind == NodeKind::Add   ? " + "
                   : n.kind == NodeKind::Sub ? " - "
                   : n.kind == NodeKind::Mul ? " * "
                   : n.kind == NodeKind::Div ? " / "
                                             : " ^ ";
  out += '(';
  print_node(*n.lhs, out);
  out += op;
  print_node(*n.rhs, out);
  out += ')';
}

double builtin_value(Builtin fn, double v) {
  switch (fn) {
    case Builtin::Exp: return std::exp(v);
    case Builtin::Log: return std::log(v);
    case Builtin::Sin: return std::sin(v);
    case Builtin::Cos: return std::cos(v);
    case Builtin::Tan: return std::tan(v);
    case Builtin::Sinh: return std::sinh(v);
    case Builtin::Cosh: return std::cosh(v);
    case Builtin::Tanh: return std::tanh(v);
    case Builtin::Atan: return std::atan(v);
    case Builtin::Sqrt: return std::sqrt(v);
    case Builtin::Abs: return std::abs(v);
  }
  return std::nan("");
}

double int_pow(double b, int n) {
  const bool neg = n < 0;
  unsigned k = static_cast<unsigned>(neg ? -n : n);
  double r = 1.0;
  while (k) {
    if (k & 1u) r *= b;
    b *= b;
    k >>= 1u;
  }
  return neg ? 1.0 / r : r;
}

}  // namespace

Dual2 Expr::eval_dual2(double x, const Params& params) const {
  if (!root_) throw DomainError("empty expression");
  return eval_node(*root_, x, params);
}

std::vector<std::string> Expr::parameters() const {
  std::set<std::string> s;
  if (root_) collect_params(*root_, s);
  return {s.begin(), s.end()};
}

bool Expr::depends_on_x() const { return root_ && uses_x(*root_); }

bool operator==(const Expr& a, const Expr& b) {
  if (!a.root_ || !b.root_) return !a.root_ && !b.root_;
  return same(*a.root_, *b.root_);
}

Expr parse(std::string_view source, std::span<const std::string> parameters) {
  for (const auto& p : parameters) {
    if (p == "x" || builtin_from_name(p)) throw ParseError(0, "parameter name '" + p + "' is reserved");
  }
  return Expr(Parser(source, parameters).run());
}

Expr parse(std::string_view source, const Params& declared) {
  std::vector<std::string> names;
  for (const auto& [k, v] : declared) names.push_back(k);
  return parse(source, std::span<const std::string>(names));
}

std::string print(const Expr& e) {
  std::string out;
  if (!e.empty()) print_node(e.root(), out);
  return out;
}

Dual2 eval_dual2(const Expr& e, double x, const Params& params) { return e.eval_dual2(x, params); }

std::optional<Builtin> builtin_from_name(std::string_view name) {
  for (const auto& [n, fn] : kBuiltins)
    if (n == name) return fn;
  return std::nullopt;
}

std::string_view builtin_name(Builtin fn) {
  for (const auto& [n, f] : kBuiltins)
    if (f == fn) return n;
  return "?";
}

namespace {

struct Emitter {
  const Params& params;
  std::vector<Compiled::Instr>& code;
  int depth = 0;
  int max_depth = 0;

  void push(Compiled::Instr in, int delta) {
    code.push_back(in);
    depth += delta;
    max_depth = std::max(max_depth, depth);
  }

  void emit(const Node& n) {
    if (!uses_x(n)) {
      push({Compiled::Op::Const, Builtin::Exp, 0, eval_node(n, 0.0, params).v}, +1);
      return;
    }
    switch (n.kind) {
      case NodeKind::Variable:
        push({Compiled::Op::X, Builtin::Exp, 0, 0.0}, +1);
        return;
      case NodeKind::Negate:
        emit(*n.lhs);
        push({Compiled::Op::Neg, Builtin::Exp, 0, 0.0}, 0);
        return;
      case NodeKind::Call:
        emit(*n.lhs);
        push({Compiled::Op::Call, n.fn, 0, 0.0}, 0);
        return;
      case NodeKind::Pow:
        if (!uses_x(*n.rhs)) {
          const double c = eval_node(*n.rhs, 0.0, params).v;
          emit(*n.lhs);
          if (is_integer(c) && std::abs(c) <= 64.0)
            push({Compiled::Op::PowInt, Builtin::Exp, static_cast<int>(c), c}, 0);
          else
            push({Compiled::Op::PowConst, Builtin::Exp, 0, c}, 0);
          return;
        }
        break;
      default:
        break;
    }
    emit(*n.lhs);
    emit(*n.rhs);
    Compiled::Op op = Compiled::Op::Add;
    switch (n.kind) {
      case NodeKind::Add: op = Compiled::Op::Add; break;
      case NodeKind::Sub: op = Compiled::Op::Sub; break;
      case NodeKind::Mul: op = Compiled::Op::Mul; break;
      case NodeKind::Div: op = Compiled::Op::Div; break;
      default: op = Compiled::Op::Pow; break;
    }
    push({op, Builtin::Exp, 0, 0.0}, -1);
  }
};

}  // namespace

Compiled::Compiled(const Expr& e, const Params& params) {
  if (e.empty()) throw DomainError("empty expression");
  if (!e.depends_on_x()) {
    constant_ = e.eval(0.0, params);
    code_.push_back({Op::Const, Builtin::Exp, 0, *constant_});
    depth_ = 1;
    return;
  }
  Emitter em{params, code_};
  em.emit(e.root());
  depth_ = em.max_depth;
}

double Compiled::operator()(double x) const {
  constexpr int kSmall = 32;
  std::array<double, kSmall> small;
  small[0] = 0.0;
  std::vector<double> big;
  double* st = small.data();
  if (depth_ > kSmall) {
    big.resize(static_cast<std::size_t>(depth_));
    st = big.data();
  }
  int sp = -1;
  for (const Instr& in : code_) {
    switch (in.op) {
      case Op::Const: st[++sp] = in.c; break;
      case Op::X: st[++sp] = x; break;
      case Op::Neg: st[sp] = -st[sp]; break;
      case Op::Add: st[sp - 1] += st[sp]; --sp; break;
      case Op::Sub: st[sp - 1] -= st[sp]; --sp; break;
      case Op::Mul: st[sp - 1] *= st[sp]; --sp; break;
      case Op::Div: st[sp - 1] /= st[sp]; --sp; break;
      case Op::PowInt: st[sp] = int_pow(st[sp], in.n); break;
      case Op::PowConst:
        st[sp] = (st[sp] < 0.0) ? std::nan("") : std::pow(st[sp], in.c);
        break;
      case Op::Pow:
        st[sp - 1] = (st[sp - 1] > 0.0) ? std::exp(st[sp] * std::log(st[sp - 1])) : std::nan("");
        --sp;
        break;
      case Op::Call: st[sp] = builtin_value(in.fn, st[sp]); break;
    }
  }
  return st[0];
}

}  // namespace perpetual::expr
