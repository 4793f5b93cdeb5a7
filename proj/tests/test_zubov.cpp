#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "nlyap/errors.hpp"
#include "nlyap/zubov.hpp"

using namespace nlyap;

namespace {

ZubovTransform exp_transform(double alpha) {
  ZubovTransform tr;
  tr.alpha = alpha;
  return tr;
}

double sq_norm(std::span<const double> x) { return x[0] * x[0]; }

}  // namespace

TEST(Zubov, BetaExamples) {
  const auto tr = exp_transform(1.0);
  EXPECT_EQ(tr.beta(0.0), 0.0);
  EXPECT_NEAR(tr.beta(std::log(2.0)), 0.5, 1e-15);
  ZubovTransform th;
  th.kind = TransformKind::Tanh;
  th.alpha = 0.5;
  EXPECT_EQ(th.beta(std::numeric_limits<double>::infinity()), 1.0);
  EXPECT_NEAR(th.beta(1e3), 1.0, 1e-15);
  EXPECT_THROW(tr.beta(-1.0), ArgumentError);
}

TEST(Zubov, BetaInverseRoundTrip) {
  for (const auto kind : {TransformKind::Exp, TransformKind::Tanh}) {
    ZubovTransform tr;
    tr.kind = kind;
    tr.alpha = 0.7;
    for (int i = 0; i <= 999; ++i) {
      const double w = 0.001 * i;
      EXPECT_NEAR(tr.beta(tr.beta_inverse(w)), w, 1e-10) << to_string(kind);
    }
    EXPECT_EQ(tr.beta_inverse(1.0), std::numeric_limits<double>::infinity());
  }
}

TEST(Zubov, PsiIsTheDerivativeRelation) {
  // beta' = psi(beta) (1 - beta): the defining ODE of each transform.
  for (const auto kind : {TransformKind::Exp, TransformKind::Tanh}) {
    ZubovTransform tr;
    tr.kind = kind;
    tr.alpha = 1.3;
    for (double s : {0.0, 0.2, 1.0, 3.0}) {
      const double b = tr.beta(s);
      EXPECT_NEAR(tr.beta_derivative(s), tr.psi(b) * (1.0 - b), 1e-12);
      const double h = 1e-6;
      EXPECT_NEAR(tr.psi_derivative(b), (tr.psi(b + h) - tr.psi(b - h)) / (2 * h), 1e-6);
    }
  }
}

TEST(Zubov, LyapunovResidualExamples) {
  const auto lin = make_builtin(BuiltinSystem::ScalarLinear);
  const Expr x = Expr::var(0);
  const ExprCandidate half(1, 0.5 * sqr(x), {x});
  const ExprCandidate full(1, sqr(x), {2.0 * x});
  const ExprCandidate zero(1, Expr(0.0), {Expr(0.0)});
  for (double p : {-0.7, 0.3, 1.2}) EXPECT_NEAR(lyapunov_residual(lin, sq_norm, half, std::vector<double>{p}), 0.0, 1e-15);
  EXPECT_DOUBLE_EQ(lyapunov_residual(lin, sq_norm, full, std::vector<double>{1.0}), -1.0);
  EXPECT_DOUBLE_EQ(lyapunov_residual(lin, sq_norm, zero, std::vector<double>{0.4}), 0.16);
}

TEST(Zubov, ZubovResidualExamples) {
  const auto cubic = make_builtin(BuiltinSystem::ScalarCubic);
  const auto tr = exp_transform(2.0);
  const ExprCandidate one(1, Expr(1.0), {Expr(0.0)});
  const ExprCandidate zero(1, Expr(0.0), {Expr(0.0)});
  EXPECT_EQ(zubov_residual(cubic, tr, one, std::vector<double>{0.5}), 0.0);
  EXPECT_DOUBLE_EQ(zubov_residual(cubic, tr, zero, std::vector<double>{1.0}), 2.0);
}

TEST(Zubov, OracleSolvesThePde) {
  const auto cubic = make_builtin(BuiltinSystem::ScalarCubic);
  for (double alpha : {2.0, 4.0, 6.0}) {
    const auto tr = exp_transform(alpha);
    const auto oracle = scalar_cubic_oracle_candidate(alpha);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
      const std::vector<double> x{-0.9 + 1.8 * i / 999.0};
      worst = std::max(worst, std::fabs(zubov_residual(cubic, tr, oracle, x)));
      EXPECT_NEAR(oracle.value(x), analytic_oracle_scalar_cubic(tr, x[0]), 1e-14);
    }
    EXPECT_LE(worst, 1e-8) << alpha;
  }
}

TEST(Zubov, OracleExamples) {
  EXPECT_EQ(analytic_oracle_scalar_cubic(exp_transform(2.0), 0.0), 0.0);
  EXPECT_NEAR(analytic_oracle_scalar_cubic(exp_transform(2.0), 0.6), 0.36, 1e-15);
  EXPECT_NEAR(analytic_oracle_scalar_cubic(exp_transform(1.0), 0.8), 0.4, 1e-15);
  EXPECT_EQ(analytic_oracle_scalar_cubic(exp_transform(1.0), 1.2), 1.0);
  EXPECT_THROW(scalar_cubic_oracle_candidate(3.0), ArgumentError);
}

TEST(Zubov, ValueTailMatrix) {
  const auto tail = value_tail_matrix(make_builtin(BuiltinSystem::ScalarLinear), exp_transform(1.0));
  ASSERT_TRUE(tail.has_value());
  EXPECT_NEAR((*tail)(0, 0), 0.5, 1e-14);
}

TEST(Zubov, LabelsOnScalarCubic) {
  const auto cubic = make_builtin(BuiltinSystem::ScalarCubic);
  const auto tr = exp_transform(2.0);
  const auto tail = value_tail_matrix(cubic, tr);
  const IntegratorConfig cfg;
  const auto mid = label_point(cubic, tr, cfg, std::vector<double>{0.6}, tail);
  EXPECT_EQ(mid.status, LabelStatus::Interior);
  EXPECT_NEAR(mid.w_hat, 0.36, 2e-2);
  const auto origin = label_point(cubic, tr, cfg, std::vector<double>{0.0}, tail);
  EXPECT_EQ(origin.w_hat, 0.0);
  const auto out = label_point(cubic, tr, cfg, std::vector<double>{-1.3}, tail);
  EXPECT_EQ(out.status, LabelStatus::NonConvergent);
  EXPECT_EQ(out.w_hat, 1.0);
}

TEST(Zubov, DatasetIsDeterministicAndMonotone) {
  const auto cubic = make_builtin(BuiltinSystem::ScalarCubic);
  const auto tr = exp_transform(2.0);
  const auto a = generate_dataset(cubic, tr, IntegratorConfig{}, 400, 5);
  const auto b = generate_dataset(cubic, tr, IntegratorConfig{}, 400, 5);
  ASSERT_EQ(a.samples.size(), 400u);
  std::vector<std::pair<double, double>> interior;
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    EXPECT_EQ(a.samples[i].z, b.samples[i].z);
    EXPECT_EQ(a.samples[i].w_hat, b.samples[i].w_hat);
    const auto& s = a.samples[i];
    if (std::fabs(s.z[0]) > 1.0) EXPECT_EQ(s.w_hat, 1.0);
    if (s.status == LabelStatus::Interior) interior.emplace_back(std::fabs(s.z[0]), s.w_hat);
  }
  std::sort(interior.begin(), interior.end());
  for (std::size_t i = 1; i < interior.size(); ++i) EXPECT_LE(interior[i - 1].second, interior[i].second + 1e-9);
  EXPECT_GT(interior.size(), 200u);
  EXPECT_EQ(a.count(LabelStatus::Interior), interior.size());
  EXPECT_TRUE(a.tail_closed);
}

TEST(Zubov, DatasetCsvRoundTrip) {
  const auto vdp = make_builtin(BuiltinSystem::VanDerPolReversed);
  const auto data = generate_dataset(vdp, exp_transform(0.2), IntegratorConfig{}, 50, 3);
  std::stringstream ss;
  ss << "# {\"note\": \"metadata\"}\n";
  write_dataset_csv(ss, data.samples);
  const auto back = read_dataset_csv(ss);
  ASSERT_EQ(back.size(), data.samples.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].z, data.samples[i].z);
    EXPECT_EQ(back[i].w_hat, data.samples[i].w_hat);
    EXPECT_EQ(back[i].status, data.samples[i].status);
  }
}

TEST(Zubov, TransformValidation) {
  ZubovTransform tr;
  tr.alpha = 0.0;
  EXPECT_THROW(tr.validate(), ArgumentError);
  EXPECT_EQ(transform_kind_from_string("tanh"), TransformKind::Tanh);
  EXPECT_THROW(transform_kind_from_string("cosh"), ArgumentError);
}
