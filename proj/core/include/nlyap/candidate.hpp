#pragma once

// A scalar function W(x) with point values, gradients and interval
// enclosures of both. Residuals, the verifier and the ROA search work
// against this interface, so a trained network and a closed-form oracle go
// through the same code.

#include <span>
#include <string>
#include <vector>

#include "nlyap/expr.hpp"
#include "nlyap/interval.hpp"

namespace nlyap {

class CandidateFunction {
 public:
  virtual ~CandidateFunction() = default;

  virtual std::size_t dim() const = 0;
  virtual double value(std::span<const double> x) const = 0;
  virtual double value_and_gradient(std::span<const double> x, std::span<double> grad) const = 0;
  virtual Interval enclose_value(std::span<const Interval> box) const = 0;
  virtual Interval enclose_value_and_gradient(std::span<const Interval> box,
                                              std::span<Interval> grad) const = 0;
  virtual std::string describe() const = 0;
};

/// Candidate given by an expression and its hand-written gradient.
class ExprCandidate final : public CandidateFunction {
 public:
  ExprCandidate(std::size_t dim, Expr value, std::vector<Expr> gradient, std::string label = "");

  std::size_t dim() const override { return dim_; }
  double value(std::span<const double> x) const override;
  double value_and_gradient(std::span<const double> x, std::span<double> grad) const override;
  Interval enclose_value(std::span<const Interval> box) const override;
  Interval enclose_value_and_gradient(std::span<const Interval> box,
                                      std::span<Interval> grad) const override;
  std::string describe() const override { return label_; }

 private:
  std::size_t dim_;
  std::string label_;
  ExprProgram value_program_;
  ExprProgram joint_program_;  // outputs: value, grad_0, ..., grad_{n-1}
};

}  // namespace nlyap
