#pragma once

// Residual training: mean squared PDE residual on collocation
// points plus weighted boundary and data terms, minimized with Adam.

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nlyap/dynamics.hpp"
#include "nlyap/net.hpp"
#include "nlyap/odeint.hpp"
#include "nlyap/zubov.hpp"

namespace nlyap {

enum class PdeKind { Lyapunov, Zubov };

std::string to_string(PdeKind k);
PdeKind pde_kind_from_string(const std::string& s);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct TrainConfig {
  std::size_t n_collocation = 300000;
  std::size_t n_boundary = 512;
  std::size_t n_data = 3000;
  double lambda_b = 1.0;
  double lambda_d = 1.0;
  std::size_t epochs = 20;
  std::size_t batch_size = 32;
  AdamConfig adam;
  std::uint64_t seed = 0;
  PdeKind pde = PdeKind::Zubov;
  /// Share of the collocation points held out for model selection.
  double validation_fraction = 0.05;
  /// Approximate size of the regular grid on which the residual bound is measured.
  std::size_t eval_grid_points = 4096;
  /// The origin (target 0) joins every minibatch instead of being shuffled
  /// in with the other boundary points.
  bool anchor_origin = true;

  void validate() const;
};

struct TargetPoint {
  std::vector<double> x;
  double target = 0.0;
};

struct PointSets {
  std::vector<std::vector<double>> collocation;
  std::vector<std::vector<double>> validation;
  std::vector<TargetPoint> boundary;
  std::vector<TargetPoint> data;
  /// Every boundary probe converged, so only the origin constrains W.
  bool boundary_degenerate = false;
  std::size_t integration_failures = 0;
  bool tail_closed = true;
};

/// Collocation uniform in X; boundary = origin (target 0), probed points on
/// the faces of X that escape (target 1) and the non-convergent data samples;
/// data = simulated labels with the excluded samples dropped. Under the
/// Lyapunov PDE the data targets are value integrals and only interior
/// samples are kept.
PointSets sample_points(const VectorFieldSpec& sys, const TrainConfig& cfg,
                        const ZubovTransform& tr, const IntegratorConfig& icfg);

/// A minibatch drawn from the three point sets.
struct Batch {
  std::vector<const std::vector<double>*> collocation;
  std::vector<const TargetPoint*> boundary;
  std::vector<const TargetPoint*> data;

  bool empty() const { return collocation.empty() && boundary.empty() && data.empty(); }
  static Batch full(const PointSets& sets);
};

struct LossValue {
  double residual = 0.0;  // mean F^2
  double boundary = 0.0;  // lambda_b * mean boundary error^2
  double data = 0.0;      // lambda_d * mean data error^2
  double total() const { return residual + boundary + data; }
};

/// PDE residual F(x) of the network under cfg.pde.
double pde_residual(const VectorFieldSpec& sys, const ZubovTransform& tr, PdeKind pde,
                    const NetParams& net, std::span<const double> x);

/// Loss on a batch; `grad` (canonical order) is overwritten when nonempty.
/// Throws NumericError naming the point and component on non-finite values.
LossValue loss(const NetParams& net, const VectorFieldSpec& sys, const ZubovTransform& tr,
               const TrainConfig& cfg, const Batch& batch, std::span<double> grad = {});

struct EpochStats {
  double loss = 0.0;
  double residual = 0.0;
  double boundary = 0.0;
  double data = 0.0;
  double validation = 0.0;
};

struct TrainingReport {
  std::vector<EpochStats> epochs;
  double initial_validation = 0.0;
  std::size_t best_epoch = 0;  // 0 means the initial parameters
  double best_validation = 0.0;
  double eps_hat = 0.0;    // max |F| over the held-out grid
  double eps_hat_b = 0.0;  // max boundary error
  std::size_t grid_points = 0;
  double wall_seconds = 0.0;
  std::size_t steps = 0;
  bool boundary_degenerate = false;

  nlohmann::json to_json() const;
};

class TrainingDivergence : public std::runtime_error {
 public:
  TrainingDivergence(const std::string& what, TrainingReport report)
      : std::runtime_error(what), report_(std::move(report)) {}
  const TrainingReport& report() const { return report_; }

 private:
  TrainingReport report_;
};

/// Regular grid over the box with about `target_points` nodes, excluding none.
std::vector<std::vector<double>> held_out_grid(const BoxRegion& box, std::size_t target_points);

/// Max |F| over `points`.
double max_abs_residual(const VectorFieldSpec& sys, const ZubovTransform& tr, PdeKind pde,
                        const NetParams& net, std::span<const std::vector<double>> points);

class Adam {
 public:
  Adam(std::size_t size, AdamConfig cfg);
  void step(std::span<double> params, std::span<const double> grad);
  std::size_t steps() const { return t_; }

 private:
  AdamConfig cfg_;
  std::vector<double> m_, v_;
  std::size_t t_ = 0;
};

/// Minibatch Adam over the shuffled union of the point sets (with the origin
/// in every batch when cfg.anchor_origin is set); returns the
/// parameters with the lowest validation loss. Throws TrainingDivergence
/// once a batch loss exceeds 1e6.
std::pair<NetParams, TrainingReport> train(const VectorFieldSpec& sys, const TrainConfig& cfg,
                                           const ZubovTransform& tr, const NetParams& init,
                                           const PointSets& sets);

}  // namespace nlyap
