// Acceptance suite: one PASS/FAIL line per criterion.
//
//   nlyap_acceptance [--expect-fail N]... [N]...
//
// With no positional arguments every criterion runs. The exit status is 0
// when every criterion that ran either passed or was listed with
// --expect-fail; an expected failure that passes is reported but not an error.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fd.hpp"
#include "fuzz_expr.hpp"
#include "nlyap/config.hpp"
#include "nlyap/lyapunov_matrix.hpp"
#include "nlyap/net.hpp"
#include "nlyap/roa.hpp"
#include "nlyap/train.hpp"
#include "nlyap/verify.hpp"
#include "nlyap/zubov.hpp"

using namespace nlyap;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

// Accumulates named checks into one outcome.
class Checks {
 public:
  void expect(bool ok, const std::string& what) {
    pass_ = pass_ && ok;
    if (!detail_.empty()) detail_ += "; ";
    detail_ += what + (ok ? "" : " [x]");
  }
  Outcome done() const { return {pass_, detail_}; }

 private:
  bool pass_ = true;
  std::string detail_;
};

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

RunConfig shipped(const std::string& name) {
  return load_run_config(std::string(NLYAP_CONFIG_DIR) + "/" + name + ".json");
}

struct Trained {
  NetParams net;
  TrainingReport report;
};

Trained train_from(const RunConfig& cfg, const VectorFieldSpec& sys) {
  const PointSets sets = sample_points(sys, cfg.train, cfg.transform, cfg.integrator);
  const NetParams init = NetParams::xavier(cfg.layer_dims(sys.dim()), cfg.net.seed, cfg.net.head);
  auto [net, report] = train(sys, cfg.train, cfg.transform, init, sets);
  return {std::move(net), std::move(report)};
}

// Local check, level search and volumes exactly as the CLI runs them.
struct RoaRun {
  LocalResult local;
  RoaResult roa;
  std::string failure;
};

RoaRun certify(const RunConfig& cfg, const VectorFieldSpec& sys, std::shared_ptr<const CandidateFunction> w) {
  RoaRun run;
  run.local = verify_local(sys, cfg.q_matrix(sys.dim()), cfg.verify.eps_local, cfg.check_options());
  const DoaSamples doa = estimate_doa(sys, cfg.integrator, cfg.verify.doa_samples, cfg.verify.doa_seed);
  try {
    run.roa = search_max_level(sys, std::move(w), run.local.P, run.local.c, sys.domain(), cfg.roa_options(), &doa);
  } catch (const RoaSearchFailure& e) {
    run.failure = e.what();
  }
  return run;
}

double sup_error_vs_square(const CandidateFunction& w) {
  double err = 0.0;
  for (int i = 0; i <= 1800; ++i) {
    const double x = -0.9 + 1.8 * i / 1800.0;
    err = std::max(err, std::fabs(w.value(std::vector<double>{x}) - x * x));
  }
  return err;
}

void add_roa_checks(Checks& ck, const RoaRun& run, double min_c2, bool strict_c2, double min_volume) {
  if (!run.failure.empty()) {
    ck.expect(false, "level search: " + run.failure);
    return;
  }
  const double c2 = run.roa.c2;
  ck.expect(strict_c2 ? c2 > min_c2 : c2 >= min_c2, "c2 = " + fmt(c2));
  ck.expect(run.roa.volume_ratio >= min_volume, "volume " + fmt(run.roa.volume_ratio));
  ck.expect(run.roa.outside_below == 0, std::to_string(run.roa.outside_below) + " out-of-DoA samples");
}

Outcome scalar_cubic() {
  Checks ck;
  const auto t0 = Clock::now();
  const RunConfig cfg = shipped("scalar_cubic");
  const auto sys = cfg.make_system();
  const Trained t = train_from(cfg, sys);
  const auto w = std::make_shared<NetCandidate>(t.net);
  ck.expect(sup_error_vs_square(*w) <= 0.05, "sup|W - x^2| = " + fmt(sup_error_vs_square(*w)));
  add_roa_checks(ck, certify(cfg, sys, w), 0.5, false, 0.70);
  const double elapsed = seconds_since(t0);
  ck.expect(elapsed <= 60.0, fmt(elapsed) + " s");
  const RoaRun oracle = certify(cfg, sys, std::make_shared<ExprCandidate>(scalar_cubic_oracle_candidate(2.0)));
  ck.expect(oracle.failure.empty() && oracle.roa.c2 >= 0.9, "oracle c2 = " + fmt(oracle.roa.c2));
  return ck.done();
}

Outcome trained_system(const std::string& name, double min_volume, double limit_seconds) {
  Checks ck;
  const auto t0 = Clock::now();
  const RunConfig cfg = shipped(name);
  const auto sys = cfg.make_system();
  const Trained t = train_from(cfg, sys);
  add_roa_checks(ck, certify(cfg, sys, std::make_shared<NetCandidate>(t.net)), 0.0, true, min_volume);
  const double elapsed = seconds_since(t0);
  if (limit_seconds > 0.0) ck.expect(elapsed <= limit_seconds, fmt(elapsed) + " s");
  else ck.expect(true, fmt(elapsed) + " s");
  return ck.done();
}

Outcome van_der_pol() {
  const RunConfig cfg = shipped("van_der_pol");
  if (cfg.train.n_collocation > 50000) return {false, "config exceeds 50k collocation points"};
  return trained_system("van_der_pol", 0.80, 20 * 60.0);
}

Outcome power_system() { return trained_system("two_machine_power", 0.60, 0.0); }

Outcome pendulum_local() {
  Checks ck;
  const auto sys = make_builtin(BuiltinSystem::InvertedPendulum);
  const auto t0 = Clock::now();
  const LocalResult res = verify_local(sys, Eigen::MatrixXd::Identity(2, 2), 1e-4);
  const double elapsed = seconds_since(t0);
  ck.expect(res.global_on_X || res.c > 0.0, "c = " + fmt(res.c) + (res.global_on_X ? " (global on X)" : ""));
  ck.expect(elapsed <= 10.0, fmt(elapsed) + " s");

  // Resample the certified region: the derivative bound and the decrease of
  // V = x'Px itself.
  const auto lin = linearization(sys);
  const BoxRegion box = res.global_on_X ? sys.domain() : ellipsoid_bounding_box(res.P, res.c, sys.domain());
  Rng rng(2024);
  std::vector<double> x(2);
  std::size_t accepted = 0, bound_violations = 0, decrease_violations = 0;
  while (accepted < 1'000'000) {
    rng.fill_uniform(box, x);
    const Eigen::Vector2d v(x[0], x[1]);
    if (!res.global_on_X && v.dot(res.P * v) > res.c) continue;
    ++accepted;
    Eigen::Matrix2d Dg;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) Dg(i, j) = lin.residual_jacobian[i][j].eval(x);
    if (2.0 * (res.P * Dg).norm() > res.r) ++bound_violations;
    const auto fx = sys.eval_f(x);
    const Eigen::Vector2d f(fx[0], fx[1]);
    if (v.squaredNorm() > 0.0 && 2.0 * v.dot(res.P * f) >= 0.0) ++decrease_violations;
  }
  ck.expect(bound_violations == 0, std::to_string(bound_violations) + " bound violations in 1e6 samples");
  ck.expect(decrease_violations == 0, std::to_string(decrease_violations) + " non-decreasing samples");
  return ck.done();
}

Outcome gradients() {
  Checks ck;
  Rng rng(55);
  double worst_input = 0.0, worst_param = 0.0, worst_dir = 0.0;
  for (int t = 0; t < 10; ++t) {
    const std::size_t n = 1 + rng.below(4);
    std::vector<std::size_t> dims{n};
    const std::size_t layers = 1 + rng.below(3);
    for (std::size_t l = 0; l < layers; ++l) dims.push_back(30);
    dims.push_back(1);
    NetParams net = NetParams::xavier(dims, rng.next());
    for (auto& b : net.biases)
      for (auto& v : b) v = rng.uniform(-0.5, 0.5);
    std::vector<double> x(n), dir(n);
    for (auto& e : x) e = rng.uniform(-1.5, 1.5);
    for (auto& e : dir) e = rng.uniform(-1.0, 1.0);
    auto [w, tape] = forward(net, x);
    worst_input = std::max(
        worst_input, max_rel_error(input_gradient(net, tape),
                                   richardson_gradient([&](std::span<const double> p) { return forward(net, p).first; },
                                                       x, 1e-3)));
    NetParams probe = net;
    const std::vector<double> theta = net.flatten();
    worst_param = std::max(worst_param, max_rel_error(param_gradient_output(net, tape),
                                                      richardson_gradient(
                                                          [&](std::span<const double> th) {
                                                            probe.assign(th);
                                                            return forward(probe, x).first;
                                                          },
                                                          theta, 1e-3)));
    const auto directional = [&](std::span<const double> th) {
      probe.assign(th);
      ForwardTape tp;
      forward(probe, x, tp);
      const auto g = input_gradient(probe, tp);
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += g[i] * dir[i];
      return s;
    };
    worst_dir = std::max(worst_dir, max_rel_error(param_gradient_directional_input_grad(net, tape, dir),
                                                  richardson_gradient(directional, theta, 1e-3)));
  }
  ck.expect(worst_input <= 1e-5, "input " + fmt(worst_input));
  ck.expect(worst_param <= 1e-5, "parameter " + fmt(worst_param));
  ck.expect(worst_dir <= 1e-5, "directional " + fmt(worst_dir));

  // Composite loss: residual, boundary and data terms together.
  const auto sys = make_builtin(BuiltinSystem::VanDerPolReversed);
  TrainConfig cfg;
  cfg.lambda_b = 2.0;
  cfg.lambda_d = 0.5;
  ZubovTransform tr;
  tr.alpha = 0.2;
  const NetParams net = NetParams::xavier({2, 30, 30, 30, 1}, 9);
  std::vector<std::vector<double>> coll(8, std::vector<double>(2));
  std::vector<TargetPoint> bound(4), data(4);
  for (auto& x : coll) rng.fill_uniform(sys.domain(), x);
  for (auto* set : {&bound, &data})
    for (auto& p : *set) {
      p.x.resize(2);
      rng.fill_uniform(sys.domain(), p.x);
      p.target = set == &bound ? 1.0 : rng.uniform();
    }
  Batch b;
  for (auto& x : coll) b.collocation.push_back(&x);
  for (auto& p : bound) b.boundary.push_back(&p);
  for (auto& p : data) b.data.push_back(&p);
  std::vector<double> grad(net.param_count());
  loss(net, sys, tr, cfg, b, grad);
  NetParams probe = net;
  const double loss_err = max_rel_error(grad, richardson_gradient(
                                                  [&](std::span<const double> th) {
                                                    probe.assign(th);
                                                    return loss(probe, sys, tr, cfg, b).total();
                                                  },
                                                  net.flatten(), 1e-3));
  ck.expect(loss_err <= 1e-5, "composite loss " + fmt(loss_err));
  return ck.done();
}

Outcome interval_fuzz() {
  Checks ck;
  const auto t0 = Clock::now();
  const FuzzReport rep = fuzz_expression_containment(100000, 2718);
  const double elapsed = seconds_since(t0);
  ck.expect(rep.cases == 100000, std::to_string(rep.cases) + " cases");
  ck.expect(rep.violations == 0, std::to_string(rep.violations) + " violations" +
                                     (rep.first_failure.empty() ? "" : " (" + rep.first_failure + ")"));
  ck.expect(elapsed <= 60.0, fmt(elapsed) + " s");
  return ck.done();
}

Outcome lyapunov_matrix() {
  Rng rng(31);
  double worst = 0.0;
  int failures = 0;
  for (int t = 0; t < 100; ++t) {
    const Eigen::Index n = 1 + static_cast<Eigen::Index>(rng.below(8));
    Eigen::MatrixXd M(n, n), L(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) {
        M(i, j) = rng.normal();
        L(i, j) = rng.normal();
      }
    const Eigen::MatrixXd A =
        M - (M.eigenvalues().real().maxCoeff() + rng.uniform(0.1, 2.0)) * Eigen::MatrixXd::Identity(n, n);
    const Eigen::MatrixXd Q = L * L.transpose() + 0.1 * Eigen::MatrixXd::Identity(n, n);
    const double rel = lyapunov_residual_norm(A, solve_lyapunov_matrix(A, Q), Q) / Q.norm();
    worst = std::max(worst, rel);
    if (rel > 1e-10) ++failures;
  }
  return {failures == 0, "worst residual / |Q|_F = " + fmt(worst) + " over 100 systems"};
}

Outcome convergence() {
  RunConfig cfg = shipped("scalar_cubic");
  const auto sys = cfg.make_system();
  std::vector<double> medians;
  std::string detail = "median sup-error";
  for (std::size_t n : {1000, 5000, 25000}) {
    std::vector<double> errs;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      cfg.train.n_collocation = n;
      cfg.train.seed = seed;
      cfg.net.seed = seed;
      const Trained t = train_from(cfg, sys);
      errs.push_back(sup_error_vs_square(NetCandidate(t.net)));
    }
    std::nth_element(errs.begin(), errs.begin() + 2, errs.end());
    medians.push_back(errs[2]);
    detail += " " + std::to_string(n) + ": " + fmt(errs[2]);
  }
  const bool monotone = medians[1] <= medians[0] && medians[2] <= medians[1];
  return {monotone, detail};
}

Outcome ten_dimensional() {
  Checks ck;
  const auto sys = make_builtin(BuiltinSystem::TenDimensional);
  CheckOptions opts;
  opts.delta_split = 1e-2;
  const auto t0 = Clock::now();
  try {
    const LocalResult res = verify_local(sys, Eigen::MatrixXd::Identity(10, 10), 1e-4, opts);
    ck.expect(res.c > 0.0, "c = " + fmt(res.c) + ", " + std::to_string(res.certificate.boxes_processed) + " boxes");
  } catch (const VerificationFailure& e) {
    ck.expect(false, e.what());
  }
  const double elapsed = seconds_since(t0);
  ck.expect(elapsed <= 600.0, fmt(elapsed) + " s");
  return ck.done();
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all{
      {1, "scalar cubic: fit, certified level and volume, oracle level", scalar_cubic},
      {2, "van der Pol: certified level, volume, no false inclusions", van_der_pol},
      {3, "inverted pendulum: local certificate and 1e6-sample recheck", pendulum_local},
      {4, "two-machine power: certified level, volume, no false inclusions", power_system},
      {5, "gradients against finite differences", gradients},
      {6, "interval enclosure fuzz", interval_fuzz},
      {7, "Lyapunov matrix residual", lyapunov_matrix},
      {8, "sup-error non-increasing in collocation count", convergence},
      {9, "10-d local certificate", ten_dimensional},
  };
  std::set<int> selected, expected_fail;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--expect-fail" && i + 1 < argc) {
      expected_fail.insert(std::atoi(argv[++i]));
    } else {
      selected.insert(std::atoi(a.c_str()));
    }
  }

  int unexpected = 0;
  for (const auto& c : all) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const bool known = expected_fail.count(c.id) > 0;
    if (!o.pass && !known) ++unexpected;
    std::cout << "criterion " << c.id << ": " << (o.pass ? "PASS" : "FAIL") << (!o.pass && known ? " (expected)" : "")
              << " - " << c.name << " - " << o.detail << " [" << fmt(seconds_since(t0)) << " s]" << std::endl;
  }
  return unexpected == 0 ? 0 : 1;
}
