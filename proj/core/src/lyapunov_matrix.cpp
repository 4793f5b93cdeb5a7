#include "nlyap/lyapunov_matrix.hpp"

#include <Eigen/Eigenvalues>

#include "nlyap/errors.hpp"

namespace nlyap {

namespace {

// Index of the unknown P(i, j), i <= j, in row-major upper-triangular order.
Eigen::Index sym_index(Eigen::Index i, Eigen::Index j, Eigen::Index n) {
  if (i > j) std::swap(i, j);
  return i * n - i * (i - 1) / 2 + (j - i);
}

Eigen::VectorXd apply_operator(const Eigen::MatrixXd& A, const Eigen::VectorXd& p) {
  const Eigen::Index n = A.rows();
  Eigen::MatrixXd P(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) P(i, j) = p(sym_index(i, j, n));
  const Eigen::MatrixXd R = P * A + A.transpose() * P;
  Eigen::VectorXd out(p.size());
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i; j < n; ++j) out(sym_index(i, j, n)) = R(i, j);
  return out;
}

}  // namespace

bool is_hurwitz(const Eigen::MatrixXd& A) {
  if (A.rows() != A.cols() || A.rows() == 0) throw ArgumentError("is_hurwitz: A must be square");
  Eigen::EigenSolver<Eigen::MatrixXd> es(A, false);
  if (es.info() != Eigen::Success) throw NumericError("is_hurwitz: eigenvalue iteration failed");
  return (es.eigenvalues().real().array() < 0.0).all();
}

double min_eigenvalue_symmetric(const Eigen::MatrixXd& S) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

double max_eigenvalue_symmetric(const Eigen::MatrixXd& S) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S, Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

Eigen::MatrixXd solve_lyapunov_matrix(const Eigen::MatrixXd& A, const Eigen::MatrixXd& Q) {
  const Eigen::Index n = A.rows();
  if (A.cols() != n || Q.rows() != n || Q.cols() != n)
    throw ArgumentError("solve_lyapunov_matrix: shape mismatch");
  if ((Q - Q.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + Q.cwiseAbs().maxCoeff()))
    throw ArgumentError("solve_lyapunov_matrix: Q is not symmetric");
  if (!(min_eigenvalue_symmetric(Q) > 0.0))
    throw ArgumentError("solve_lyapunov_matrix: Q is not positive definite");
  if (!is_hurwitz(A)) throw ArgumentError("solve_lyapunov_matrix: A is not Hurwitz");

  const Eigen::Index m = n * (n + 1) / 2;
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(m, m);
  Eigen::VectorXd rhs(m);
  // Row (i, j): sum_k P(i,k) A(k,j) + A(k,i) P(k,j) = -Q(i,j).
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j) {
      const Eigen::Index row = sym_index(i, j, n);
      rhs(row) = -Q(i, j);
      for (Eigen::Index k = 0; k < n; ++k) {
        M(row, sym_index(i, k, n)) += A(k, j);
        M(row, sym_index(k, j, n)) += A(k, i);
      }
    }
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(M);
  if (!lu.isInvertible()) throw NumericError("solve_lyapunov_matrix: singular system");
  Eigen::VectorXd p = lu.solve(rhs);
  p += lu.solve(rhs - apply_operator(A, p));

  Eigen::MatrixXd P(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) P(i, j) = p(sym_index(i, j, n));
  if (!P.allFinite()) throw NumericError("solve_lyapunov_matrix: non-finite solution");
  return 0.5 * (P + P.transpose());
}

double lyapunov_residual_norm(const Eigen::MatrixXd& A, const Eigen::MatrixXd& P,
                              const Eigen::MatrixXd& Q) {
  return (P * A + A.transpose() * P + Q).norm();
}

}  // namespace nlyap
