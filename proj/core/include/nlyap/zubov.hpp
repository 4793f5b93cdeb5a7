#pragma once

// Lyapunov and Zubov PDE residuals, the beta transform between the value
// integral V and W = beta(V), and ground-truth labels from simulation.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nlyap/candidate.hpp"
#include "nlyap/dynamics.hpp"
#include "nlyap/odeint.hpp"

namespace nlyap {

enum class TransformKind {
  Exp,   // beta(s) = 1 - exp(-alpha s), psi(s) = alpha
  Tanh,  // beta(s) = tanh(alpha s),     psi(s) = alpha (1 + s)
};

std::string to_string(TransformKind k);
TransformKind transform_kind_from_string(const std::string& s);

/// omega(x) = omega_scale * |x|^2 together with the (psi, beta) pair.
struct ZubovTransform {
  TransformKind kind = TransformKind::Exp;
  double alpha = 1.0;
  double omega_scale = 1.0;

  void validate() const;

  double omega(std::span<const double> x) const;
  double psi(double w) const;
  double psi_derivative(double w) const;
  /// Argument error for negative s; +inf maps to 1.
  double beta(double s) const;
  double beta_derivative(double s) const;
  /// Inverse of beta on [0, 1); 1 maps to +inf.
  double beta_inverse(double w) const;
};

/// DV(x) . f(x) + omega(x).
double lyapunov_residual(const VectorFieldSpec& sys, const ScalarField& omega,
                         const CandidateFunction& candidate, std::span<const double> x);

/// DW(x) . f(x) + omega(x) psi(W(x)) (1 - W(x)).
double zubov_residual(const VectorFieldSpec& sys, const ZubovTransform& tr,
                      const CandidateFunction& candidate, std::span<const double> x);

/// P with P A + Aᵀ P = -omega_scale I for A = Df(0): near the origin the
/// remaining value integral is xᵀ P x. Empty when A is not Hurwitz.
std::optional<Eigen::MatrixXd> value_tail_matrix(const VectorFieldSpec& sys,
                                                 const ZubovTransform& tr);

enum class LabelStatus { Interior, NonConvergent, Excluded };

std::string to_string(LabelStatus s);
LabelStatus label_status_from_string(const std::string& s);

struct LabeledSample {
  std::vector<double> z;
  double w_hat = 0.0;
  LabelStatus status = LabelStatus::Excluded;
};

struct Dataset {
  std::vector<LabeledSample> samples;
  std::size_t integration_failures = 0;
  /// False when the linearization is not Hurwitz and no tail was added.
  bool tail_closed = true;

  std::size_t count(LabelStatus s) const;
};

/// Uniform samples in the domain box labelled by simulation. Sample i uses
/// the random stream stream_seed(seed, i), so the result does not depend
/// on evaluation order.
Dataset generate_dataset(const VectorFieldSpec& sys, const ZubovTransform& tr,
                         const IntegratorConfig& cfg, std::size_t n_data, std::uint64_t seed);

/// Label for a single point (same rule as generate_dataset).
LabeledSample label_point(const VectorFieldSpec& sys, const ZubovTransform& tr,
                          const IntegratorConfig& cfg, std::span<const double> z,
                          const std::optional<Eigen::MatrixXd>& tail);

/// CSV with header x_1..x_n,w_hat,status. The reader skips leading '#' lines.
void write_dataset_csv(std::ostream& os, std::span<const LabeledSample> samples);
std::vector<LabeledSample> read_dataset_csv(std::istream& is);

/// W(x) = 1 - (1 - x^2)^(alpha/2) for x' = -x + x^3 with omega = x^2;
/// 1 outside (-1, 1).
double analytic_oracle_scalar_cubic(const ZubovTransform& tr, double x);

/// The same oracle as an expression candidate, valid on (-1, 1). Needs
/// alpha / 2 to be a positive integer so the power stays polynomial.
ExprCandidate scalar_cubic_oracle_candidate(double alpha);

}  // namespace nlyap
