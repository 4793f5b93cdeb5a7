#pragma once

#include <Eigen/Dense>

namespace nlyap {

/// True when every eigenvalue of A has negative real part (Schur/QR iteration).
bool is_hurwitz(const Eigen::MatrixXd& A);

double min_eigenvalue_symmetric(const Eigen::MatrixXd& S);
double max_eigenvalue_symmetric(const Eigen::MatrixXd& S);

/// Solves P A + Aᵀ P = -Q for symmetric P.
///
/// The n(n+1)/2 upper-triangular unknowns are assembled into one dense
/// linear system and solved by LU with one step of iterative refinement;
/// the result is symmetrized. Throws ArgumentError when A is not Hurwitz
/// or Q is not symmetric positive definite, NumericError when the system
/// is singular.
Eigen::MatrixXd solve_lyapunov_matrix(const Eigen::MatrixXd& A, const Eigen::MatrixXd& Q);

double lyapunov_residual_norm(const Eigen::MatrixXd& A, const Eigen::MatrixXd& P,
                              const Eigen::MatrixXd& Q);

}  // namespace nlyap
