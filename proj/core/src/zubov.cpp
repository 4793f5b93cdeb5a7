#include "nlyap/zubov.hpp"

#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "nlyap/errors.hpp"
#include "nlyap/lyapunov_matrix.hpp"
#include "nlyap/rng.hpp"

namespace nlyap {

std::string to_string(TransformKind k) { return k == TransformKind::Exp ? "exp" : "tanh"; }

TransformKind transform_kind_from_string(const std::string& s) {
  if (s == "exp") return TransformKind::Exp;
  if (s == "tanh") return TransformKind::Tanh;
  throw ArgumentError("unknown transform kind '" + s + "' (expected exp or tanh)");
}

void ZubovTransform::validate() const {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ArgumentError("ZubovTransform: alpha must be positive");
  if (!(omega_scale > 0.0) || !std::isfinite(omega_scale))
    throw ArgumentError("ZubovTransform: omega_scale must be positive");
}

double ZubovTransform::omega(std::span<const double> x) const {
  double s = 0.0;
  for (double v : x) s += v * v;
  return omega_scale * s;
}

double ZubovTransform::psi(double w) const {
  return kind == TransformKind::Exp ? alpha : alpha * (1.0 + w);
}

double ZubovTransform::psi_derivative(double) const {
  return kind == TransformKind::Exp ? 0.0 : alpha;
}

double ZubovTransform::beta(double s) const {
  if (!(s >= 0.0)) throw ArgumentError("beta: argument must be non-negative");
  if (std::isinf(s)) return 1.0;
  return kind == TransformKind::Exp ? -std::expm1(-alpha * s) : std::tanh(alpha * s);
}

double ZubovTransform::beta_derivative(double s) const {
  const double b = beta(s);
  return (1.0 - b) * psi(b);
}

double ZubovTransform::beta_inverse(double w) const {
  if (!(w >= 0.0 && w <= 1.0)) throw ArgumentError("beta_inverse: argument must lie in [0, 1]");
  if (w == 1.0) return std::numeric_limits<double>::infinity();
  return kind == TransformKind::Exp ? -std::log1p(-w) / alpha : std::atanh(w) / alpha;
}

double lyapunov_residual(const VectorFieldSpec& sys, const ScalarField& omega,
                         const CandidateFunction& candidate, std::span<const double> x) {
  const std::size_t n = sys.dim();
  thread_local std::vector<double> grad, f;
  grad.resize(n);
  f.resize(n);
  candidate.value_and_gradient(x, grad);
  sys.eval_f(x, f);
  double lie = 0.0;
  for (std::size_t i = 0; i < n; ++i) lie += grad[i] * f[i];
  return lie + omega(x);
}

double zubov_residual(const VectorFieldSpec& sys, const ZubovTransform& tr,
                      const CandidateFunction& candidate, std::span<const double> x) {
  const std::size_t n = sys.dim();
  thread_local std::vector<double> grad, f;
  grad.resize(n);
  f.resize(n);
  const double w = candidate.value_and_gradient(x, grad);
  sys.eval_f(x, f);
  double lie = 0.0;
  for (std::size_t i = 0; i < n; ++i) lie += grad[i] * f[i];
  return lie + tr.omega(x) * tr.psi(w) * (1.0 - w);
}

std::optional<Eigen::MatrixXd> value_tail_matrix(const VectorFieldSpec& sys,
                                                 const ZubovTransform& tr) {
  const Eigen::MatrixXd A = linearization(sys).A;
  if (!is_hurwitz(A)) return std::nullopt;
  const auto n = static_cast<Eigen::Index>(sys.dim());
  return solve_lyapunov_matrix(A, tr.omega_scale * Eigen::MatrixXd::Identity(n, n));
}

std::string to_string(LabelStatus s) {
  switch (s) {
    case LabelStatus::Interior: return "interior";
    case LabelStatus::NonConvergent: return "nonconvergent";
    case LabelStatus::Excluded: return "excluded";
  }
  return "excluded";
}

LabelStatus label_status_from_string(const std::string& s) {
  if (s == "interior") return LabelStatus::Interior;
  if (s == "nonconvergent") return LabelStatus::NonConvergent;
  if (s == "excluded") return LabelStatus::Excluded;
  throw ArgumentError("unknown label status '" + s + "'");
}

std::size_t Dataset::count(LabelStatus s) const {
  std::size_t c = 0;
  for (const auto& x : samples) c += x.status == s ? 1 : 0;
  return c;
}

LabeledSample label_point(const VectorFieldSpec& sys, const ZubovTransform& tr,
                          const IntegratorConfig& cfg, std::span<const double> z,
                          const std::optional<Eigen::MatrixXd>& tail) {
  LabeledSample s{std::vector<double>(z.begin(), z.end()), 1.0, LabelStatus::Excluded};
  const ScalarField omega = [&tr](std::span<const double> x) { return tr.omega(x); };
  const auto out = integrate_with_value(sys, omega, z, cfg, tail);
  switch (out.status) {
    case TrajectoryStatus::Converged:
      s.status = LabelStatus::Interior;
      s.w_hat = std::min(tr.beta(out.value_integral), std::nextafter(1.0, 0.0));
      break;
    case TrajectoryStatus::Escaped:
      s.status = LabelStatus::NonConvergent;
      s.w_hat = 1.0;
      break;
    case TrajectoryStatus::TimedOut:
      s.status = LabelStatus::Excluded;
      s.w_hat = tr.beta(out.value_integral);
      break;
  }
  return s;
}

Dataset generate_dataset(const VectorFieldSpec& sys, const ZubovTransform& tr,
                         const IntegratorConfig& cfg, std::size_t n_data, std::uint64_t seed) {
  if (n_data == 0) throw ArgumentError("generate_dataset: n_data must be positive");
  tr.validate();
  cfg.validate(sys.domain());
  Dataset ds;
  const auto tail = value_tail_matrix(sys, tr);
  ds.tail_closed = tail.has_value();
  ds.samples.reserve(n_data);
  std::vector<double> z(sys.dim());
  for (std::size_t i = 0; i < n_data; ++i) {
    Rng rng(stream_seed(seed, i));
    rng.fill_uniform(sys.domain(), z);
    try {
      ds.samples.push_back(label_point(sys, tr, cfg, z, tail));
    } catch (const IntegrationError& e) {
      ++ds.integration_failures;
      ds.samples.push_back({z, tr.beta(e.partial().value_integral), LabelStatus::Excluded});
    }
  }
  return ds;
}

void write_dataset_csv(std::ostream& os, std::span<const LabeledSample> samples) {
  const std::size_t n = samples.empty() ? 0 : samples.front().z.size();
  for (std::size_t i = 0; i < n; ++i) os << "x_" << i + 1 << ',';
  os << "w_hat,status\n";
  const auto old_precision = os.precision(17);
  for (const auto& s : samples) {
    for (double v : s.z) os << v << ',';
    os << s.w_hat << ',' << to_string(s.status) << '\n';
  }
  os.precision(old_precision);
}

std::vector<LabeledSample> read_dataset_csv(std::istream& is) {
  std::string line;
  std::size_t lineno = 0;
  do {
    if (!std::getline(is, line)) throw ArgumentError("dataset csv: missing header");
    ++lineno;
  } while (line.rfind('#', 0) == 0);
  std::size_t cols = 1;
  for (char c : line) cols += c == ',' ? 1 : 0;
  if (cols < 3 || line.rfind("x_1,", 0) != 0) throw ArgumentError("dataset csv: bad header");
  const std::size_t n = cols - 2;
  std::vector<LabeledSample> out;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    LabeledSample s;
    for (std::size_t i = 0; i < n + 2; ++i) {
      if (!std::getline(ss, cell, ','))
        throw ArgumentError("dataset csv: short row at line " + std::to_string(lineno));
      if (i < n) {
        s.z.push_back(std::stod(cell));
      } else if (i == n) {
        s.w_hat = std::stod(cell);
      } else {
        s.status = label_status_from_string(cell);
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

double analytic_oracle_scalar_cubic(const ZubovTransform& tr, double x) {
  if (tr.kind != TransformKind::Exp || tr.omega_scale != 1.0)
    throw ArgumentError("analytic oracle: needs the exp transform with omega = x^2");
  if (std::fabs(x) >= 1.0) return 1.0;
  return -std::expm1(0.5 * tr.alpha * std::log1p(-x * x));
}

ExprCandidate scalar_cubic_oracle_candidate(double alpha) {
  const double k_real = 0.5 * alpha;
  const int k = static_cast<int>(std::lround(k_real));
  if (k < 1 || static_cast<double>(k) != k_real)
    throw ArgumentError("oracle candidate: alpha/2 must be a positive integer");
  const Expr x = Expr::var(0);
  const Expr base = 1.0 - sqr(x);
  Expr w = 1.0 - powi(base, k);
  Expr dw = (2.0 * k) * x * powi(base, k - 1);
  std::ostringstream label;
  label << "analytic_oracle(alpha=" << alpha << ")";
  return ExprCandidate(1, std::move(w), {std::move(dw)}, label.str());
}

}  // namespace nlyap
