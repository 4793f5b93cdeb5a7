#include <benchmark/benchmark.h>

#include <cmath>
#include <memory>
#include <vector>

#include "nlyap/dynamics.hpp"
#include "nlyap/lyapunov_matrix.hpp"
#include "nlyap/net.hpp"
#include "nlyap/odeint.hpp"
#include "nlyap/rng.hpp"
#include "nlyap/verify.hpp"
#include "nlyap/zubov.hpp"

using namespace nlyap;

namespace {

NetParams bench_net(std::size_t width) { return NetParams::xavier({2, width, width, 1}, 7); }

void BM_Forward(benchmark::State& state) {
  const NetParams net = bench_net(static_cast<std::size_t>(state.range(0)));
  const std::vector<double> x{0.3, -0.2};
  ForwardTape tape;
  for (auto _ : state) benchmark::DoNotOptimize(forward(net, x, tape));
}
BENCHMARK(BM_Forward)->Arg(16)->Arg(30)->Arg(64);

// Value, input gradient and the fused parameter gradient of one residual term.
void BM_ResidualGradient(benchmark::State& state) {
  const NetParams net = bench_net(static_cast<std::size_t>(state.range(0)));
  const std::vector<double> x{0.3, -0.2}, f{-0.2, 0.5};
  ForwardTape tape;
  TangentTape tan;
  std::vector<double> acc(net.param_count());
  for (auto _ : state) {
    forward(net, x, tape);
    const double lie = directional_forward(net, tape, f, tan);
    accumulate_param_gradient(net, tape, tan, 0.5, lie, acc);
    benchmark::DoNotOptimize(acc.data());
  }
}
BENCHMARK(BM_ResidualGradient)->Arg(16)->Arg(30)->Arg(64);

void BM_EncloseValueAndGradient(benchmark::State& state) {
  const NetCandidate w(bench_net(30));
  const double h = std::pow(10.0, -static_cast<double>(state.range(0)));
  const std::vector<Interval> box{Interval(0.3 - h, 0.3 + h), Interval(-0.2 - h, -0.2 + h)};
  std::vector<Interval> grad(2);
  for (auto _ : state) benchmark::DoNotOptimize(w.enclose_value_and_gradient(box, grad));
}
BENCHMARK(BM_EncloseValueAndGradient)->Arg(1)->Arg(3);

void BM_LieDerivativeEnclosure(benchmark::State& state) {
  const auto sys = make_builtin(BuiltinSystem::VanDerPolReversed);
  const TermPtr lie = lie_derivative_term(std::make_shared<NetCandidate>(bench_net(30)), sys);
  const std::vector<Interval> box{Interval(0.29, 0.31), Interval(-0.21, -0.19)};
  for (auto _ : state) benchmark::DoNotOptimize(lie->enclose(box));
}
BENCHMARK(BM_LieDerivativeEnclosure);

// The cubic oracle's level-set inclusion on the whole domain.
void BM_CheckImplication(benchmark::State& state) {
  const auto sys = make_builtin(BuiltinSystem::ScalarCubic);
  const auto w = std::make_shared<ExprCandidate>(scalar_cubic_oracle_candidate(2.0));
  Eigen::MatrixXd P(1, 1);
  P << 0.5;
  for (auto _ : state)
    benchmark::DoNotOptimize(verify_inner_condition(w, P, 0.16, 0.3, sys.domain(), CheckOptions{}));
}
BENCHMARK(BM_CheckImplication)->Unit(benchmark::kMillisecond);

void BM_VerifyLocal(benchmark::State& state) {
  const auto sys = make_builtin(BuiltinSystem::VanDerPolReversed);
  const Eigen::MatrixXd Q = Eigen::MatrixXd::Identity(2, 2);
  for (auto _ : state) benchmark::DoNotOptimize(verify_local(sys, Q, 1e-4).c);
}
BENCHMARK(BM_VerifyLocal)->Unit(benchmark::kMillisecond);

void BM_IntegrateWithValue(benchmark::State& state) {
  const auto sys = make_builtin(BuiltinSystem::VanDerPolReversed);
  ZubovTransform tr;
  tr.alpha = 0.2;
  const ScalarField omega = [&tr](std::span<const double> x) { return tr.omega(x); };
  const auto tail = value_tail_matrix(sys, tr);
  const std::vector<double> x0{1.0, 1.0};
  for (auto _ : state) benchmark::DoNotOptimize(integrate_with_value(sys, omega, x0, IntegratorConfig{}, tail));
}
BENCHMARK(BM_IntegrateWithValue)->Unit(benchmark::kMicrosecond);

void BM_SolveLyapunovMatrix(benchmark::State& state) {
  const auto n = static_cast<Eigen::Index>(state.range(0));
  Rng rng(3);
  Eigen::MatrixXd A(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) A(i, j) = 0.3 * rng.normal();
  A -= (A.eigenvalues().real().maxCoeff() + 1.0) * Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd Q = Eigen::MatrixXd::Identity(n, n);
  for (auto _ : state) benchmark::DoNotOptimize(solve_lyapunov_matrix(A, Q));
}
BENCHMARK(BM_SolveLyapunovMatrix)->Arg(2)->Arg(8)->Arg(10);

}  // namespace

BENCHMARK_MAIN();
