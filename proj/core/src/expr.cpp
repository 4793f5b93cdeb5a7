#include "nlyap/expr.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace nlyap {

namespace {

// Point and interval primitives under one spelling for the templated
// evaluator.
double apply_sin(double x) { return std::sin(x); }
double apply_cos(double x) { return std::cos(x); }
double apply_tanh(double x) { return std::tanh(x); }
double apply_exp(double x) { return std::exp(x); }
double apply_abs(double x) { return std::fabs(x); }
double apply_sqrt(double x) { return std::sqrt(x); }
double apply_min(double a, double b) { return std::fmin(a, b); }
double apply_max(double a, double b) { return std::fmax(a, b); }
double apply_powi(double x, int k) {
  if (k == 2) return x * x;
  return std::pow(x, k);
}

Interval apply_sin(const Interval& x) { return sin(x); }
Interval apply_cos(const Interval& x) { return cos(x); }
Interval apply_tanh(const Interval& x) { return tanh(x); }
Interval apply_exp(const Interval& x) { return exp(x); }
Interval apply_abs(const Interval& x) { return abs(x); }
Interval apply_sqrt(const Interval& x) { return sqrt(x); }
Interval apply_min(const Interval& a, const Interval& b) { return min(a, b); }
Interval apply_max(const Interval& a, const Interval& b) { return max(a, b); }
Interval apply_powi(const Interval& x, int k) { return powi(x, k); }

template <class T>
T apply(ExprOp op, const T& a, const T& b, double value, int k) {
  switch (op) {
    case ExprOp::Const: return T(value);
    case ExprOp::Add: return a + b;
    case ExprOp::Sub: return a - b;
    case ExprOp::Mul: return a * b;
    case ExprOp::Div: return a / b;
    case ExprOp::Neg: return -a;
    case ExprOp::Sin: return apply_sin(a);
    case ExprOp::Cos: return apply_cos(a);
    case ExprOp::Tanh: return apply_tanh(a);
    case ExprOp::Exp: return apply_exp(a);
    case ExprOp::Powi: return apply_powi(a, k);
    case ExprOp::Abs: return apply_abs(a);
    case ExprOp::Sqrt: return apply_sqrt(a);
    case ExprOp::Min: return apply_min(a, b);
    case ExprOp::Max: return apply_max(a, b);
    case ExprOp::Var: break;
  }
  throw std::logic_error("apply: unexpected op");
}

template <class T>
T eval_node(const Expr& e, std::span<const T> x) {
  const auto ch = e.children();
  switch (e.op()) {
    case ExprOp::Const: return T(e.constant_value());
    case ExprOp::Var:
      if (e.var_index() >= x.size()) throw std::invalid_argument("Expr: variable out of range");
      return x[e.var_index()];
    default: break;
  }
  const T a = eval_node(ch[0], x);
  const T b = ch.size() > 1 ? eval_node(ch[1], x) : T(0.0);
  return apply(e.op(), a, b, 0.0, e.op() == ExprOp::Powi ? e.exponent() : 0);
}

const char* op_name(ExprOp op) {
  switch (op) {
    case ExprOp::Sin: return "sin";
    case ExprOp::Cos: return "cos";
    case ExprOp::Tanh: return "tanh";
    case ExprOp::Exp: return "exp";
    case ExprOp::Abs: return "abs";
    case ExprOp::Sqrt: return "sqrt";
    case ExprOp::Min: return "min";
    case ExprOp::Max: return "max";
    default: return "?";
  }
}

void print(const Expr& e, std::ostringstream& os) {
  const auto ch = e.children();
  switch (e.op()) {
    case ExprOp::Const: os << e.constant_value(); return;
    case ExprOp::Var: os << 'x' << e.var_index() + 1; return;
    case ExprOp::Add:
    case ExprOp::Sub:
    case ExprOp::Mul:
    case ExprOp::Div: {
      const char sym = e.op() == ExprOp::Add   ? '+'
                       : e.op() == ExprOp::Sub ? '-'
                       : e.op() == ExprOp::Mul ? '*'
                                               : '/';
      os << '(';
      print(ch[0], os);
      os << ' ' << sym << ' ';
      print(ch[1], os);
      os << ')';
      return;
    }
    case ExprOp::Neg: os << "-"; print(ch[0], os); return;
    case ExprOp::Powi: print(ch[0], os); os << '^' << e.exponent(); return;
    case ExprOp::Min:
    case ExprOp::Max:
      os << op_name(e.op()) << '(';
      print(ch[0], os);
      os << ", ";
      print(ch[1], os);
      os << ')';
      return;
    default:
      os << op_name(e.op()) << '(';
      print(ch[0], os);
      os << ')';
      return;
  }
}

bool is_one(const Expr& e) { return e.is_constant() && e.constant_value() == 1.0; }

}  // namespace

Expr::Expr() : Expr(constant(0.0)) {}
Expr::Expr(double value) : Expr(constant(value)) {}

Expr Expr::make(ExprOp op, std::vector<Expr> children, double value, std::size_t index) {
  return Expr(std::make_shared<const Node>(Node{op, value, index, std::move(children)}));
}

Expr Expr::constant(double value) {
  if (!std::isfinite(value)) throw std::invalid_argument("Expr: non-finite constant");
  return make(ExprOp::Const, {}, value);
}

Expr Expr::var(std::size_t index) { return make(ExprOp::Var, {}, 0.0, index); }

ExprOp Expr::op() const { return node_->op; }
double Expr::constant_value() const { return node_->value; }
std::size_t Expr::var_index() const { return node_->index; }
int Expr::exponent() const { return static_cast<int>(static_cast<long long>(node_->index)); }
std::span<const Expr> Expr::children() const { return node_->children; }

std::size_t Expr::arity() const {
  if (op() == ExprOp::Var) return var_index() + 1;
  std::size_t n = 0;
  for (const auto& c : children()) n = std::max(n, c.arity());
  return n;
}

std::size_t Expr::node_count() const {
  std::unordered_set<const Node*> seen;
  std::vector<const Expr*> stack{this};
  while (!stack.empty()) {
    const Expr* e = stack.back();
    stack.pop_back();
    if (!seen.insert(e->id()).second) continue;
    for (const auto& c : e->children()) stack.push_back(&c);
  }
  return seen.size();
}

double Expr::eval(std::span<const double> x) const { return eval_node<double>(*this, x); }

Interval Expr::enclose(std::span<const Interval> x) const {
  return eval_node<Interval>(*this, x);
}

std::string Expr::to_string() const {
  std::ostringstream os;
  os.precision(17);
  print(*this, os);
  return os.str();
}

// Only exact simplifications: identities with 0 and 1 and negated constants.
Expr operator+(const Expr& a, const Expr& b) {
  if (a.is_zero()) return b;
  if (b.is_zero()) return a;
  return Expr::make(ExprOp::Add, {a, b});
}

Expr operator-(const Expr& a, const Expr& b) {
  if (b.is_zero()) return a;
  if (a.is_zero()) return -b;
  return Expr::make(ExprOp::Sub, {a, b});
}

Expr operator*(const Expr& a, const Expr& b) {
  if (a.is_zero() || b.is_zero()) return Expr(0.0);
  if (is_one(a)) return b;
  if (is_one(b)) return a;
  return Expr::make(ExprOp::Mul, {a, b});
}

Expr operator/(const Expr& a, const Expr& b) {
  if (is_one(b)) return a;
  return Expr::make(ExprOp::Div, {a, b});
}

Expr operator-(const Expr& a) {
  if (a.is_constant()) return Expr(-a.constant_value());
  return Expr::make(ExprOp::Neg, {a});
}

Expr sin(const Expr& a) { return Expr::make(ExprOp::Sin, {a}); }
Expr cos(const Expr& a) { return Expr::make(ExprOp::Cos, {a}); }
Expr tanh(const Expr& a) { return Expr::make(ExprOp::Tanh, {a}); }
Expr exp(const Expr& a) { return Expr::make(ExprOp::Exp, {a}); }
Expr abs(const Expr& a) { return Expr::make(ExprOp::Abs, {a}); }
Expr sqrt(const Expr& a) { return Expr::make(ExprOp::Sqrt, {a}); }
Expr min(const Expr& a, const Expr& b) { return Expr::make(ExprOp::Min, {a, b}); }
Expr max(const Expr& a, const Expr& b) { return Expr::make(ExprOp::Max, {a, b}); }

Expr powi(const Expr& a, int k) {
  if (k == 0) return Expr(1.0);
  if (k == 1) return a;
  if (a.is_zero() && k > 0) return Expr(0.0);
  return Expr::make(ExprOp::Powi, {a}, 0.0,
                    static_cast<std::size_t>(static_cast<long long>(k)));
}

// ---------------------------------------------------------------------------

ExprProgram::ExprProgram(std::span<const Expr> outputs, std::size_t arity) : arity_(arity) {
  std::unordered_map<const Expr::Node*, std::size_t> slot;
  // Registers [0, arity) hold the inputs.
  std::size_t next = arity;
  auto emit = [&](auto&& self, const Expr& e) -> std::size_t {
    if (auto it = slot.find(e.id()); it != slot.end()) return it->second;
    std::size_t r;
    if (e.op() == ExprOp::Var) {
      if (e.var_index() >= arity_) throw std::invalid_argument("ExprProgram: variable out of range");
      r = e.var_index();
    } else {
      const auto ch = e.children();
      const std::size_t a = ch.size() > 0 ? self(self, ch[0]) : 0;
      const std::size_t b = ch.size() > 1 ? self(self, ch[1]) : 0;
      code_.push_back({e.op(), e.is_constant() ? e.constant_value() : 0.0, a, b,
                       e.op() == ExprOp::Powi ? e.exponent() : 0});
      r = next++;
    }
    slot.emplace(e.id(), r);
    return r;
  };
  for (const auto& e : outputs) outputs_.push_back(emit(emit, e));
}

template <class T>
void ExprProgram::run(std::span<const T> x, std::span<T> out, std::vector<T>& regs) const {
  if (x.size() != arity_ || out.size() != outputs_.size())
    throw std::invalid_argument("ExprProgram: size mismatch");
  regs.resize(arity_ + code_.size());
  for (std::size_t i = 0; i < arity_; ++i) regs[i] = x[i];
  std::size_t r = arity_;
  for (const auto& in : code_) {
    regs[r++] = apply<T>(in.op, regs[in.a], regs[in.b], in.value, in.k);
  }
  for (std::size_t i = 0; i < outputs_.size(); ++i) out[i] = regs[outputs_[i]];
}

void ExprProgram::eval(std::span<const double> x, std::span<double> out) const {
  thread_local std::vector<double> regs;
  run<double>(x, out, regs);
}

void ExprProgram::enclose(std::span<const Interval> x, std::span<Interval> out) const {
  thread_local std::vector<Interval> regs;
  run<Interval>(x, out, regs);
}

}  // namespace nlyap
