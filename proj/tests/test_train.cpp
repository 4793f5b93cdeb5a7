#include <gtest/gtest.h>

#include <cmath>

#include "fd.hpp"
#include "nlyap/errors.hpp"
#include "nlyap/train.hpp"

using namespace nlyap;

namespace {

TrainConfig small_config() {
  TrainConfig cfg;
  cfg.n_collocation = 2000;
  cfg.n_boundary = 16;
  cfg.n_data = 200;
  cfg.epochs = 3;
  cfg.seed = 4;
  cfg.eval_grid_points = 200;
  return cfg;
}

ZubovTransform exp_transform(double alpha) {
  ZubovTransform tr;
  tr.alpha = alpha;
  return tr;
}

// Residual recomputed from forward() and input_gradient() only.
double independent_zubov_residual(const VectorFieldSpec& sys, double alpha, const NetParams& net,
                                  std::span<const double> x) {
  auto [w, tape] = forward(net, x);
  const auto g = input_gradient(net, tape);
  const auto f = sys.eval_f(x);
  double lie = 0.0, omega = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    lie += g[i] * f[i];
    omega += x[i] * x[i];
  }
  return lie + omega * alpha * (1.0 - w);
}

}  // namespace

TEST(Train, SamplePointsOnScalarCubic) {
  const auto sys = make_builtin(BuiltinSystem::ScalarCubic);
  const auto cfg = small_config();
  const auto sets = sample_points(sys, cfg, exp_transform(2.0), IntegratorConfig{});
  ASSERT_FALSE(sets.boundary.empty());
  EXPECT_EQ(sets.boundary.front().x, std::vector<double>{0.0});
  EXPECT_EQ(sets.boundary.front().target, 0.0);
  bool left = false, right = false;
  for (const auto& p : sets.boundary) {
    if (p.x[0] == -1.5) left = p.target == 1.0;
    if (p.x[0] == 1.5) right = p.target == 1.0;
  }
  EXPECT_TRUE(left);
  EXPECT_TRUE(right);
  EXPECT_EQ(sets.collocation.size() + sets.validation.size(), cfg.n_collocation);
  EXPECT_EQ(sets.validation.size(), 100u);
  for (const auto& p : sets.data)
    if (std::fabs(p.x[0]) > 1.0) EXPECT_EQ(p.target, 1.0);
}

TEST(Train, SamplePointsAreDeterministic) {
  const auto sys = make_builtin(BuiltinSystem::VanDerPolReversed);
  const auto cfg = small_config();
  const auto a = sample_points(sys, cfg, exp_transform(0.2), IntegratorConfig{});
  const auto b = sample_points(sys, cfg, exp_transform(0.2), IntegratorConfig{});
  EXPECT_EQ(a.collocation, b.collocation);
  ASSERT_EQ(a.data.size(), b.data.size());
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    EXPECT_EQ(a.data[i].x, b.data[i].x);
    EXPECT_EQ(a.data[i].target, b.data[i].target);
  }
}

TEST(Train, LossExamples) {
  const auto sys = make_builtin(BuiltinSystem::ScalarCubic);
  const auto tr = exp_transform(2.0);
  TrainConfig cfg = small_config();
  const NetParams zero = NetParams::zeros({1, 4, 1});

  const TargetPoint origin{{0.0}, 0.0};
  Batch b;
  b.boundary.push_back(&origin);
  EXPECT_EQ(loss(zero, sys, tr, cfg, b).total(), 0.0);

  const std::vector<double> x{0.7};
  Batch c;
  c.collocation.push_back(&x);
  const double omega = 0.49;
  EXPECT_NEAR(loss(zero, sys, tr, cfg, c).residual, 4.0 * omega * omega, 1e-14);

  Batch empty;
  EXPECT_THROW(loss(zero, sys, tr, cfg, empty), ArgumentError);
}

TEST(Train, ConstantNetResidual) {
  // DW = 0, so only the omega term is left.
  const auto sys = make_builtin(BuiltinSystem::ScalarLinear);
  NetParams net = NetParams::zeros({1, 1});
  net.biases[0][0] = 0.3;
  const std::vector<double> x{0.5};
  EXPECT_NEAR(pde_residual(sys, exp_transform(1.0), PdeKind::Lyapunov, net, x), 0.25, 1e-15);
  EXPECT_NEAR(pde_residual(sys, exp_transform(1.0), PdeKind::Zubov, net, x), 0.25 * 0.7, 1e-15);
}

TEST(Train, CompositeLossGradientMatchesFiniteDifferences) {
  Rng rng(10);
  for (const auto pde : {PdeKind::Zubov, PdeKind::Lyapunov}) {
    for (const auto& name : {"van_der_pol", "two_machine_power", "scalar_cubic"}) {
      const auto sys = make_builtin(name);
      TrainConfig cfg = small_config();
      cfg.pde = pde;
      cfg.lambda_b = 2.0;
      cfg.lambda_d = 0.5;
      ZubovTransform tr = exp_transform(0.8);
      if (pde == PdeKind::Zubov && std::string(name) == "scalar_cubic") tr.kind = TransformKind::Tanh;
      const NetParams net = random_net(rng, sys.dim(), 3, 12);
      std::vector<std::vector<double>> coll(6, std::vector<double>(sys.dim()));
      std::vector<TargetPoint> bound(3), data(4);
      for (auto& x : coll) rng.fill_uniform(sys.domain(), x);
      for (auto& p : bound) {
        p.x.resize(sys.dim());
        rng.fill_uniform(sys.domain(), p.x);
        p.target = 1.0;
      }
      for (auto& p : data) {
        p.x.resize(sys.dim());
        rng.fill_uniform(sys.domain(), p.x);
        p.target = rng.uniform();
      }
      Batch b;
      for (auto& x : coll) b.collocation.push_back(&x);
      for (auto& p : bound) b.boundary.push_back(&p);
      for (auto& p : data) b.data.push_back(&p);

      std::vector<double> grad(net.param_count());
      loss(net, sys, tr, cfg, b, grad);
      NetParams probe = net;
      const auto fd = richardson_gradient(
          [&](std::span<const double> th) {
            probe.assign(th);
            return loss(probe, sys, tr, cfg, b).total();
          },
          net.flatten(), 1e-3);
      EXPECT_LE(max_rel_error(grad, fd), 1e-5) << name << ' ' << to_string(pde);
    }
  }
}

TEST(Train, SingleGradientStepDescends) {
  const auto sys = make_builtin(BuiltinSystem::VanDerPolReversed);
  const auto cfg = small_config();
  const auto tr = exp_transform(0.2);
  const auto sets = sample_points(sys, cfg, tr, IntegratorConfig{});
  const Batch full = Batch::full(sets);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    NetParams net = NetParams::xavier({2, 10, 10, 1}, seed);
    std::vector<double> grad(net.param_count());
    const double before = loss(net, sys, tr, cfg, full, grad).total();
    std::vector<double> theta = net.flatten();
    for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= 1e-4 * grad[i];
    net.assign(theta);
    EXPECT_LT(loss(net, sys, tr, cfg, full).total(), before) << seed;
  }
}

TEST(Train, ZeroEpochsReturnsInit) {
  const auto sys = make_builtin(BuiltinSystem::ScalarCubic);
  TrainConfig cfg = small_config();
  cfg.epochs = 0;
  const auto tr = exp_transform(2.0);
  const auto sets = sample_points(sys, cfg, tr, IntegratorConfig{});
  const NetParams init = NetParams::xavier({1, 8, 1}, 3);
  const auto [net, report] = train(sys, cfg, tr, init, sets);
  EXPECT_EQ(net, init);
  EXPECT_EQ(report.best_epoch, 0u);
  EXPECT_TRUE(report.epochs.empty());
}

TEST(Train, TrainingIsDeterministicAndReportsResidualBound) {
  const auto sys = make_builtin(BuiltinSystem::ScalarCubic);
  const auto cfg = small_config();
  const auto tr = exp_transform(2.0);
  const auto sets = sample_points(sys, cfg, tr, IntegratorConfig{});
  const NetParams init = NetParams::xavier({1, 16, 16, 1}, 1);
  const auto [a, ra] = train(sys, cfg, tr, init, sets);
  const auto [b, rb] = train(sys, cfg, tr, init, sets);
  EXPECT_EQ(a, b);
  ASSERT_EQ(ra.epochs.size(), cfg.epochs);
  for (std::size_t e = 0; e < cfg.epochs; ++e) EXPECT_EQ(ra.epochs[e].loss, rb.epochs[e].loss);
  EXPECT_LT(ra.best_validation, ra.initial_validation);

  const auto grid = held_out_grid(sys.domain(), cfg.eval_grid_points);
  EXPECT_EQ(grid.size(), ra.grid_points);
  double eps = 0.0;
  for (const auto& x : grid) eps = std::max(eps, std::fabs(independent_zubov_residual(sys, 2.0, a, x)));
  EXPECT_NEAR(ra.eps_hat, eps, 1e-12);
  EXPECT_EQ(max_abs_residual(sys, tr, PdeKind::Zubov, a, grid), ra.eps_hat);
}

TEST(Train, HeldOutGridShape) {
  const BoxRegion box({Interval(-1.0, 1.0), Interval(0.0, 2.0)});
  const auto g = held_out_grid(box, 100);
  ASSERT_EQ(g.size(), 100u);
  EXPECT_DOUBLE_EQ(g.front()[0], -0.9);
  EXPECT_DOUBLE_EQ(g.front()[1], 0.1);
  for (const auto& x : g) EXPECT_TRUE(box.contains_strictly(x));
}

TEST(Train, DivergenceIsReported) {
  const auto sys = make_builtin(BuiltinSystem::VanDerPolReversed);
  TrainConfig cfg = small_config();
  cfg.adam.lr = 1e4;
  cfg.epochs = 5;
  const auto tr = exp_transform(1.0);
  const auto sets = sample_points(sys, cfg, tr, IntegratorConfig{});
  NetParams init = NetParams::xavier({2, 8, 1}, 2);
  for (auto& w : init.weights.back()) w *= 1e3;
  EXPECT_THROW(train(sys, cfg, tr, init, sets), TrainingDivergence);
}

TEST(Train, ConfigValidation) {
  TrainConfig cfg;
  cfg.batch_size = 0;
  EXPECT_THROW(cfg.validate(), ArgumentError);
  TrainConfig lam;
  lam.lambda_b = -1.0;
  EXPECT_THROW(lam.validate(), ArgumentError);
  EXPECT_EQ(pde_kind_from_string("lyapunov"), PdeKind::Lyapunov);
  EXPECT_THROW(pde_kind_from_string("heat"), ArgumentError);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  Adam adam(2, AdamConfig{});
  std::vector<double> p{1.0, -1.0};
  const std::vector<double> g{0.5, -2.0};
  adam.step(p, g);
  EXPECT_NEAR(p[0], 1.0 - 1e-3, 1e-10);
  EXPECT_NEAR(p[1], -1.0 + 1e-3, 1e-10);
  EXPECT_EQ(adam.steps(), 1u);
}
