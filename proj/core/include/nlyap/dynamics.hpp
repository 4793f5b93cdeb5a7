#pragma once

// Autonomous vector fields xdot = f(x) with the equilibrium at the origin.

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nlyap/expr.hpp"
#include "nlyap/interval.hpp"

namespace nlyap {

/// Immutable dynamical system. f and its analytic Jacobian are given as
/// expression trees; point evaluation runs the compiled programs.
class VectorFieldSpec {
 public:
  VectorFieldSpec(std::string name, std::vector<Expr> rhs,
                  std::vector<std::vector<Expr>> jacobian, BoxRegion domain,
                  std::map<std::string, double> params = {},
                  std::optional<double> lipschitz_hint = std::nullopt);

  const std::string& name() const { return name_; }
  std::size_t dim() const { return rhs_.size(); }
  const BoxRegion& domain() const { return domain_; }
  const std::map<std::string, double>& params() const { return params_; }
  std::optional<double> lipschitz_hint() const { return lipschitz_hint_; }

  const std::vector<Expr>& rhs() const { return rhs_; }
  const std::vector<std::vector<Expr>>& jacobian_exprs() const { return jacobian_; }

  /// Same dynamics on another domain box (must contain the origin strictly).
  VectorFieldSpec with_domain(BoxRegion domain) const;

  std::vector<double> eval_f(std::span<const double> x) const;
  void eval_f(std::span<const double> x, std::span<double> out) const;
  Eigen::MatrixXd eval_jacobian(std::span<const double> x) const;

  void enclose_f(std::span<const Interval> box, std::span<Interval> out) const;
  /// Row-major n x n enclosure of Df on the box.
  void enclose_jacobian(std::span<const Interval> box, std::span<Interval> out) const;

 private:
  void check_dim(std::size_t n) const;

  std::string name_;
  std::vector<Expr> rhs_;
  std::vector<std::vector<Expr>> jacobian_;
  BoxRegion domain_;
  std::map<std::string, double> params_;
  std::optional<double> lipschitz_hint_;
  ExprProgram f_program_;
  ExprProgram jacobian_program_;
};

/// xdot = A x + g(x) with A = Df(0).
struct Linearization {
  Eigen::MatrixXd A;
  /// Dg = Df - A as expressions (entries that cancel are exactly zero).
  std::vector<std::vector<Expr>> residual_jacobian;

  Eigen::VectorXd residual(const VectorFieldSpec& sys, std::span<const double> x) const;
};

Linearization linearization(const VectorFieldSpec& sys);

enum class BuiltinSystem {
  ScalarCubic,
  ScalarLinear,
  ScalarNegCubic,
  VanDerPolReversed,
  InvertedPendulum,
  TwoMachinePower,
  TenDimensional,
};

std::optional<BuiltinSystem> builtin_from_name(const std::string& name);
std::string builtin_name(BuiltinSystem kind);
std::vector<std::string> builtin_names();

/// Builtin with its default parameters, overridable through `params`:
///   van_der_pol: mu (1.0); inverted_pendulum: k1 (2.4142), k2 (2.3163);
///   two_machine_power: delta (pi/3).
/// Unknown parameter keys are rejected.
VectorFieldSpec make_builtin(BuiltinSystem kind, const std::map<std::string, double>& params = {});
VectorFieldSpec make_builtin(const std::string& name,
                             const std::map<std::string, double>& params = {});

}  // namespace nlyap
