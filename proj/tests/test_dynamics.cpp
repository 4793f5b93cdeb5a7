#include <gtest/gtest.h>

#include <cmath>

#include "nlyap/dynamics.hpp"
#include "nlyap/errors.hpp"
#include "nlyap/rng.hpp"

using namespace nlyap;

namespace {

std::vector<VectorFieldSpec> all_builtins() {
  std::vector<VectorFieldSpec> out;
  for (const auto& name : builtin_names()) out.push_back(make_builtin(name));
  out.push_back(make_builtin("van_der_pol", {{"mu", 3.0}}));
  return out;
}

}  // namespace

TEST(Dynamics, PointValues) {
  const auto cubic = make_builtin(BuiltinSystem::ScalarCubic);
  EXPECT_EQ(cubic.eval_f(std::vector<double>{0.0})[0], 0.0);
  EXPECT_DOUBLE_EQ(cubic.eval_f(std::vector<double>{0.5})[0], -0.375);

  const auto vdp = make_builtin(BuiltinSystem::VanDerPolReversed);
  const auto f = vdp.eval_f(std::vector<double>{1.0, 1.0});
  EXPECT_DOUBLE_EQ(f[0], -1.0);
  EXPECT_DOUBLE_EQ(f[1], 1.0);
}

TEST(Dynamics, JacobianExamples) {
  const auto cubic = make_builtin(BuiltinSystem::ScalarCubic);
  EXPECT_DOUBLE_EQ(cubic.eval_jacobian(std::vector<double>{0.0})(0, 0), -1.0);

  const auto pend = make_builtin(BuiltinSystem::InvertedPendulum);
  const Eigen::MatrixXd J = pend.eval_jacobian(std::vector<double>{0.0, 0.0});
  EXPECT_DOUBLE_EQ(J(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(J(0, 1), 1.0);
  EXPECT_NEAR(J(1, 0), -3.4142, 1e-12);
  EXPECT_NEAR(J(1, 1), -3.3163, 1e-12);

  const auto vdp = make_builtin(BuiltinSystem::VanDerPolReversed);
  const Eigen::MatrixXd Jv = vdp.eval_jacobian(std::vector<double>{1.0, 0.0});
  EXPECT_DOUBLE_EQ(Jv(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(Jv(0, 1), -1.0);
  EXPECT_DOUBLE_EQ(Jv(1, 0), 1.0);
  EXPECT_DOUBLE_EQ(Jv(1, 1), 0.0);
}

TEST(Dynamics, EveryBuiltinHasEquilibriumAtOrigin) {
  for (const auto& sys : all_builtins()) {
    const std::vector<double> zero(sys.dim(), 0.0);
    const auto f = sys.eval_f(zero);
    for (double v : f) EXPECT_NEAR(v, 0.0, 1e-15) << sys.name();
  }
}

TEST(Dynamics, JacobianMatchesCentralDifferences) {
  const double h = 1e-5;
  for (const auto& sys : all_builtins()) {
    Rng rng(3);
    const std::size_t n = sys.dim();
    std::vector<double> x(n), xp(n), xm(n);
    for (int trial = 0; trial < 100; ++trial) {
      rng.fill_uniform(sys.domain(), x);
      const Eigen::MatrixXd J = sys.eval_jacobian(x);
      Eigen::MatrixXd fd(n, n);
      for (std::size_t k = 0; k < n; ++k) {
        xp = x;
        xm = x;
        xp[k] += h;
        xm[k] -= h;
        const auto fp = sys.eval_f(xp), fm = sys.eval_f(xm);
        for (std::size_t i = 0; i < n; ++i) fd(i, k) = (fp[i] - fm[i]) / (2 * h);
      }
      const double err = (J - fd).cwiseAbs().rowwise().sum().maxCoeff();
      const double scale = 1.0 + J.cwiseAbs().rowwise().sum().maxCoeff();
      EXPECT_LE(err / scale, 1e-6) << sys.name();
    }
  }
}

TEST(Dynamics, JacobianEnclosureContainsPointJacobians) {
  for (const auto& sys : all_builtins()) {
    Rng rng(8);
    const std::size_t n = sys.dim();
    std::vector<double> lo(n), hi(n), x(n);
    for (int trial = 0; trial < 20; ++trial) {
      rng.fill_uniform(sys.domain(), lo);
      for (std::size_t i = 0; i < n; ++i) hi[i] = lo[i] + 0.05;
      const BoxRegion box(lo, hi);
      std::vector<Interval> J(n * n);
      sys.enclose_jacobian(box.sides(), J);
      for (int s = 0; s < 20; ++s) {
        rng.fill_uniform(box, x);
        const Eigen::MatrixXd Jp = sys.eval_jacobian(x);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t k = 0; k < n; ++k) EXPECT_TRUE(J[i * n + k].contains(Jp(i, k))) << sys.name();
      }
    }
  }
}

TEST(Dynamics, LinearizationExamples) {
  const auto lin = linearization(make_builtin(BuiltinSystem::ScalarLinear));
  EXPECT_DOUBLE_EQ(lin.A(0, 0), -1.0);
  EXPECT_TRUE(lin.residual_jacobian[0][0].is_zero());

  const auto cubic = make_builtin(BuiltinSystem::ScalarCubic);
  const auto lc = linearization(cubic);
  EXPECT_NEAR(lc.residual(cubic, std::vector<double>{0.7})(0), 0.343, 1e-15);

  const auto pend = make_builtin(BuiltinSystem::InvertedPendulum);
  const auto lp = linearization(pend);
  const std::vector<double> x{0.8, -0.3};
  EXPECT_EQ(lp.residual_jacobian[0][0].eval(x), 0.0);
  EXPECT_EQ(lp.residual_jacobian[0][1].eval(x), 0.0);
  EXPECT_EQ(lp.residual_jacobian[1][1].eval(x), 0.0);
  EXPECT_NEAR(lp.residual_jacobian[1][0].eval(x), 1.0 - std::cos(0.8), 1e-15);
}

TEST(Dynamics, LinearizationReproducesField) {
  for (const auto& sys : all_builtins()) {
    const auto lin = linearization(sys);
    Rng rng(4);
    std::vector<double> x(sys.dim());
    for (int t = 0; t < 50; ++t) {
      rng.fill_uniform(sys.domain(), x);
      const Eigen::Map<const Eigen::VectorXd> xv(x.data(), static_cast<Eigen::Index>(x.size()));
      const Eigen::VectorXd lhs = lin.A * xv + lin.residual(sys, x);
      const auto f = sys.eval_f(x);
      for (std::size_t i = 0; i < sys.dim(); ++i)
        EXPECT_NEAR(lhs(static_cast<Eigen::Index>(i)), f[i], 1e-12 * (1.0 + std::fabs(f[i]))) << sys.name();
    }
  }
}

TEST(Dynamics, ParameterHandling) {
  EXPECT_THROW(make_builtin("van_der_pol", {{"nu", 1.0}}), ArgumentError);
  EXPECT_THROW(make_builtin("no_such_system"), ArgumentError);
  const auto vdp3 = make_builtin("van_der_pol", {{"mu", 3.0}});
  EXPECT_DOUBLE_EQ(vdp3.domain()[1].hi(), 6.0);
  EXPECT_DOUBLE_EQ(vdp3.params().at("mu"), 3.0);
  for (const auto& name : builtin_names()) EXPECT_EQ(builtin_name(*builtin_from_name(name)), name);
}

TEST(Dynamics, DomainMustContainOrigin) {
  const auto cubic = make_builtin(BuiltinSystem::ScalarCubic);
  EXPECT_THROW(cubic.with_domain(BoxRegion({Interval(0.0, 1.0)})), ArgumentError);
  EXPECT_THROW(cubic.eval_f(std::vector<double>{0.0, 1.0}), ArgumentError);
}

TEST(Dynamics, PowerSystemIsShiftedToOrigin) {
  const auto pw = make_builtin(BuiltinSystem::TwoMachinePower);
  const double w = 2.0 * std::numbers::pi / 3.0 + 1.0;
  EXPECT_NEAR(pw.domain()[0].hi(), w, 1e-12);
  EXPECT_DOUBLE_EQ(pw.domain()[1].lo(), -3.0);
}
