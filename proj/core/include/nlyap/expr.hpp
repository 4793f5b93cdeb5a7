#pragma once

// Small expression IR over variables x_0..x_{n-1}.
//
// Expressions are immutable DAGs of shared nodes. They carry point and
// interval semantics: builtin vector fields, their Jacobians and the
// quadratic-pipeline predicates are all written in this IR so the verifier
// can enclose them on boxes. Evaluation goes through ExprProgram, a
// flattened instruction list with common subexpressions shared by node
// identity.

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "nlyap/interval.hpp"

namespace nlyap {

enum class ExprOp {
  Const,
  Var,
  Add,
  Sub,
  Mul,
  Div,
  Neg,
  Sin,
  Cos,
  Tanh,
  Exp,
  Powi,
  Abs,
  Sqrt,
  Min,
  Max,
};

class Expr {
 public:
  struct Node;

  Expr();  // constant 0
  Expr(double value);  // NOLINT: constants convert implicitly

  static Expr constant(double value);
  static Expr var(std::size_t index);

  ExprOp op() const;
  double constant_value() const;  // only for Const
  std::size_t var_index() const;  // only for Var
  int exponent() const;           // only for Powi
  std::span<const Expr> children() const;
  bool is_constant() const { return op() == ExprOp::Const; }
  bool is_zero() const { return is_constant() && constant_value() == 0.0; }

  /// Number of variables referenced: 1 + the largest variable index, or 0.
  std::size_t arity() const;
  std::size_t node_count() const;

  /// Direct recursive evaluation (reference semantics for ExprProgram).
  double eval(std::span<const double> x) const;
  Interval enclose(std::span<const Interval> x) const;

  std::string to_string() const;

  const Node* id() const { return node_.get(); }

  friend Expr operator+(const Expr& a, const Expr& b);
  friend Expr operator-(const Expr& a, const Expr& b);
  friend Expr operator*(const Expr& a, const Expr& b);
  friend Expr operator/(const Expr& a, const Expr& b);
  friend Expr operator-(const Expr& a);

  friend Expr sin(const Expr& a);
  friend Expr cos(const Expr& a);
  friend Expr tanh(const Expr& a);
  friend Expr exp(const Expr& a);
  friend Expr powi(const Expr& a, int k);
  friend Expr abs(const Expr& a);
  friend Expr sqrt(const Expr& a);
  friend Expr min(const Expr& a, const Expr& b);
  friend Expr max(const Expr& a, const Expr& b);

 private:
  explicit Expr(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
  static Expr make(ExprOp op, std::vector<Expr> children, double value = 0.0,
                   std::size_t index = 0);

  std::shared_ptr<const Node> node_;
};

struct Expr::Node {
  ExprOp op;
  double value;       // Const
  std::size_t index;  // Var: variable index; Powi: exponent (as int)
  std::vector<Expr> children;
};

inline Expr sqr(const Expr& a) { return powi(a, 2); }

/// Flattened multi-output evaluator. Safe to share between threads; each
/// call uses thread-local scratch space.
class ExprProgram {
 public:
  ExprProgram() = default;
  ExprProgram(std::span<const Expr> outputs, std::size_t arity);

  std::size_t arity() const { return arity_; }
  std::size_t output_count() const { return outputs_.size(); }
  std::size_t instruction_count() const { return code_.size(); }

  void eval(std::span<const double> x, std::span<double> out) const;
  void enclose(std::span<const Interval> x, std::span<Interval> out) const;

 private:
  struct Instr {
    ExprOp op;
    double value;
    std::size_t a;
    std::size_t b;
    int k;
  };
  template <class T>
  void run(std::span<const T> x, std::span<T> out, std::vector<T>& regs) const;

  std::size_t arity_ = 0;
  std::vector<Instr> code_;
  std::vector<std::size_t> outputs_;
};

}  // namespace nlyap
