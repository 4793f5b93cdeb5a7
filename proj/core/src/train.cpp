#include "nlyap/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iostream>
#include <limits>
#include <numeric>
#include <sstream>

#include "nlyap/errors.hpp"
#include "nlyap/rng.hpp"

namespace nlyap {

namespace {

constexpr double kDivergenceThreshold = 1e6;

// Stream indices for the random draws of one run.
enum Stream : std::uint64_t {
  kCollocationStream = 1,
  kBoundaryStream = 2,
  kDataStream = 3,
  kShuffleStream = 16,
};

std::string point_string(std::span<const double> x) {
  std::ostringstream os;
  os.precision(17);
  os << '(';
  for (std::size_t i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x[i];
  os << ')';
  return os.str();
}

void check_finite(double v, const char* component, std::span<const double> x) {
  if (!std::isfinite(v))
    throw NumericError(std::string("loss: non-finite ") + component + " term at x = " +
                       point_string(x));
}

struct ResidualEval {
  double w = 0.0;
  double lie = 0.0;
  double omega = 0.0;
  double F = 0.0;
};

// Fills tape/tangent at x and returns the residual pieces.
ResidualEval eval_residual(const VectorFieldSpec& sys, const ZubovTransform& tr, PdeKind pde,
                           const NetParams& net, std::span<const double> x, ForwardTape& tape,
                           TangentTape& tangent, std::vector<double>& f) {
  ResidualEval r;
  f.resize(sys.dim());
  r.w = forward(net, x, tape);
  sys.eval_f(x, f);
  r.lie = directional_forward(net, tape, f, tangent);
  r.omega = tr.omega(x);
  r.F = pde == PdeKind::Zubov ? r.lie + r.omega * tr.psi(r.w) * (1.0 - r.w) : r.lie + r.omega;
  return r;
}

}  // namespace

std::string to_string(PdeKind k) { return k == PdeKind::Zubov ? "zubov" : "lyapunov"; }

PdeKind pde_kind_from_string(const std::string& s) {
  if (s == "zubov") return PdeKind::Zubov;
  if (s == "lyapunov") return PdeKind::Lyapunov;
  throw ArgumentError("unknown pde '" + s + "' (expected zubov or lyapunov)");
}

void TrainConfig::validate() const {
  if (n_collocation == 0 || n_boundary == 0 || n_data == 0)
    throw ArgumentError("TrainConfig: point counts must be positive");
  if (!(lambda_b > 0.0) || !(lambda_d > 0.0))
    throw ArgumentError("TrainConfig: lambda_b and lambda_d must be positive");
  if (batch_size == 0) throw ArgumentError("TrainConfig: batch_size must be positive");
  if (!(adam.lr > 0.0) || !(adam.eps > 0.0) || !(adam.beta1 >= 0.0 && adam.beta1 < 1.0) ||
      !(adam.beta2 >= 0.0 && adam.beta2 < 1.0))
    throw ArgumentError("TrainConfig: invalid Adam parameters");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0))
    throw ArgumentError("TrainConfig: validation_fraction must lie in [0, 1)");
  if (eval_grid_points == 0) throw ArgumentError("TrainConfig: eval_grid_points must be positive");
}

PointSets sample_points(const VectorFieldSpec& sys, const TrainConfig& cfg,
                        const ZubovTransform& tr, const IntegratorConfig& icfg) {
  cfg.validate();
  tr.validate();
  const std::size_t n = sys.dim();
  const BoxRegion& X = sys.domain();
  PointSets sets;

  {
    Rng rng(stream_seed(cfg.seed, kCollocationStream));
    const auto n_val = static_cast<std::size_t>(
        std::floor(cfg.validation_fraction * static_cast<double>(cfg.n_collocation)));
    std::vector<double> z(n);
    for (std::size_t i = 0; i < cfg.n_collocation; ++i) {
      rng.fill_uniform(X, z);
      (i < cfg.n_collocation - n_val ? sets.collocation : sets.validation).push_back(z);
    }
  }

  sets.boundary.push_back({std::vector<double>(n, 0.0), 0.0});

  {
    // Faces are drawn in proportion to their (n-1)-volume.
    std::vector<double> face_area(n, 1.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (j != i) face_area[i] *= X[j].width();
    const double total_area = std::accumulate(face_area.begin(), face_area.end(), 0.0);
    Rng rng(stream_seed(cfg.seed, kBoundaryStream));
    std::size_t escaped = 0;
    std::vector<double> z(n);
    for (std::size_t k = 0; k < cfg.n_boundary; ++k) {
      rng.fill_uniform(X, z);
      double pick = rng.uniform() * total_area;
      std::size_t axis = 0;
      while (axis + 1 < n && pick >= face_area[axis]) pick -= face_area[axis++];
      z[axis] = rng.uniform() < 0.5 ? X[axis].lo() : X[axis].hi();
      try {
        if (integrate(sys, z, icfg).status == TrajectoryStatus::Escaped) {
          ++escaped;
          if (cfg.pde == PdeKind::Zubov) sets.boundary.push_back({z, 1.0});
        }
      } catch (const IntegrationError&) {
        ++sets.integration_failures;
      }
    }
    sets.boundary_degenerate = escaped == 0;
    if (sets.boundary_degenerate)
      std::cerr << "warning: every boundary probe converged; the boundary set is {0}\n";
  }

  const Dataset ds = generate_dataset(sys, tr, icfg, cfg.n_data, stream_seed(cfg.seed, kDataStream));
  sets.integration_failures += ds.integration_failures;
  sets.tail_closed = ds.tail_closed;
  for (const auto& s : ds.samples) {
    if (s.status == LabelStatus::Excluded) continue;
    if (cfg.pde == PdeKind::Lyapunov) {
      if (s.status == LabelStatus::Interior) sets.data.push_back({s.z, tr.beta_inverse(s.w_hat)});
      continue;
    }
    sets.data.push_back({s.z, s.w_hat});
    if (s.status == LabelStatus::NonConvergent) sets.boundary.push_back({s.z, 1.0});
  }
  return sets;
}

Batch Batch::full(const PointSets& sets) {
  Batch b;
  for (const auto& x : sets.collocation) b.collocation.push_back(&x);
  for (const auto& p : sets.boundary) b.boundary.push_back(&p);
  for (const auto& p : sets.data) b.data.push_back(&p);
  return b;
}

double pde_residual(const VectorFieldSpec& sys, const ZubovTransform& tr, PdeKind pde,
                    const NetParams& net, std::span<const double> x) {
  thread_local ForwardTape tape;
  thread_local TangentTape tangent;
  thread_local std::vector<double> f;
  return eval_residual(sys, tr, pde, net, x, tape, tangent, f).F;
}

LossValue loss(const NetParams& net, const VectorFieldSpec& sys, const ZubovTransform& tr,
               const TrainConfig& cfg, const Batch& batch, std::span<double> grad) {
  if (batch.empty()) throw ArgumentError("loss: empty batch");
  const bool want_grad = !grad.empty();
  if (want_grad) {
    if (grad.size() != net.param_count()) throw ArgumentError("loss: gradient size mismatch");
    std::fill(grad.begin(), grad.end(), 0.0);
  }
  thread_local ForwardTape tape;
  thread_local TangentTape tangent;
  thread_local std::vector<double> f;
  const TangentTape no_tangent;
  LossValue out;

  if (!batch.collocation.empty()) {
    const double inv = 1.0 / static_cast<double>(batch.collocation.size());
    double sum = 0.0;
    for (const auto* xp : batch.collocation) {
      const std::span<const double> x(*xp);
      const ResidualEval r = eval_residual(sys, tr, cfg.pde, net, x, tape, tangent, f);
      check_finite(r.F * r.F, "residual", x);
      sum += r.F * r.F;
      if (!want_grad) continue;
      double value_seed = 0.0;
      if (cfg.pde == PdeKind::Zubov)
        value_seed = 2.0 * r.F * r.omega *
                     (tr.psi_derivative(r.w) * (1.0 - r.w) - tr.psi(r.w)) * inv;
      accumulate_param_gradient(net, tape, tangent, value_seed, 2.0 * r.F * inv, grad);
    }
    out.residual = sum * inv;
  }

  auto fit_term = [&](const std::vector<const TargetPoint*>& pts, double lambda,
                      const char* component) {
    if (pts.empty()) return 0.0;
    const double inv = 1.0 / static_cast<double>(pts.size());
    double sum = 0.0;
    for (const auto* p : pts) {
      const double e = forward(net, p->x, tape) - p->target;
      check_finite(e * e, component, p->x);
      sum += e * e;
      if (want_grad) accumulate_param_gradient(net, tape, no_tangent, 2.0 * lambda * e * inv, 0.0, grad);
    }
    return lambda * sum * inv;
  };
  out.boundary = fit_term(batch.boundary, cfg.lambda_b, "boundary");
  out.data = fit_term(batch.data, cfg.lambda_d, "data");
  return out;
}

nlohmann::json TrainingReport::to_json() const {
  nlohmann::json ep = nlohmann::json::array();
  for (std::size_t i = 0; i < epochs.size(); ++i) {
    const auto& e = epochs[i];
    ep.push_back({{"epoch", i + 1},
                  {"loss", e.loss},
                  {"residual", e.residual},
                  {"boundary", e.boundary},
                  {"data", e.data},
                  {"validation", e.validation}});
  }
  return {{"epochs", ep},
          {"initial_validation", initial_validation},
          {"best_epoch", best_epoch},
          {"best_validation", best_validation},
          {"eps_hat", eps_hat},
          {"eps_hat_b", eps_hat_b},
          {"grid_points", grid_points},
          {"wall_seconds", wall_seconds},
          {"steps", steps},
          {"boundary_degenerate", boundary_degenerate}};
}

std::vector<std::vector<double>> held_out_grid(const BoxRegion& box, std::size_t target_points) {
  const std::size_t n = box.dim();
  auto m = static_cast<std::size_t>(
      std::floor(std::pow(static_cast<double>(target_points), 1.0 / static_cast<double>(n)) + 1e-9));
  m = std::max<std::size_t>(m, 2);
  std::size_t total = 1;
  for (std::size_t i = 0; i < n; ++i) total *= m;
  std::vector<std::vector<double>> grid;
  grid.reserve(total);
  std::vector<std::size_t> idx(n, 0);
  for (std::size_t k = 0; k < total; ++k) {
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i)
      x[i] = box[i].lo() + box[i].width() * (static_cast<double>(idx[i]) + 0.5) / static_cast<double>(m);
    grid.push_back(std::move(x));
    for (std::size_t i = 0; i < n && ++idx[i] == m; ++i) idx[i] = 0;
  }
  return grid;
}

double max_abs_residual(const VectorFieldSpec& sys, const ZubovTransform& tr, PdeKind pde,
                        const NetParams& net, std::span<const std::vector<double>> points) {
  double m = 0.0;
  for (const auto& x : points) m = std::max(m, std::fabs(pde_residual(sys, tr, pde, net, x)));
  return m;
}

Adam::Adam(std::size_t size, AdamConfig cfg) : cfg_(cfg), m_(size, 0.0), v_(size, 0.0) {}

void Adam::step(std::span<double> params, std::span<const double> grad) {
  if (params.size() != m_.size() || grad.size() != m_.size()) throw ArgumentError("Adam: size mismatch");
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * grad[i];
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * grad[i] * grad[i];
    params[i] -= cfg_.lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + cfg_.eps);
  }
}

std::pair<NetParams, TrainingReport> train(const VectorFieldSpec& sys, const TrainConfig& cfg,
                                           const ZubovTransform& tr, const NetParams& init,
                                           const PointSets& sets) {
  cfg.validate();
  tr.validate();
  init.validate();
  if (init.input_dim() != sys.dim()) throw ArgumentError("train: network input dimension mismatch");
  const auto t0 = std::chrono::steady_clock::now();

  TrainingReport report;
  report.boundary_degenerate = sets.boundary_degenerate;

  // Selection loss: held-out residual plus the full boundary and data terms.
  Batch val_batch;
  for (const auto& x : sets.validation) val_batch.collocation.push_back(&x);
  if (val_batch.collocation.empty())
    for (const auto& x : sets.collocation) val_batch.collocation.push_back(&x);
  for (const auto& p : sets.boundary) val_batch.boundary.push_back(&p);
  for (const auto& p : sets.data) val_batch.data.push_back(&p);
  auto validation_loss = [&](const NetParams& net) {
    return val_batch.empty() ? 0.0 : loss(net, sys, tr, cfg, val_batch).total();
  };

  NetParams net = init;
  NetParams best = init;
  report.initial_validation = validation_loss(net);
  report.best_validation = report.initial_validation;

  // Tagged indices into the union of the three sets.
  enum : std::uint8_t { kColl, kBound, kData };
  std::vector<std::pair<std::uint8_t, std::uint32_t>> pool;
  for (std::uint32_t i = 0; i < sets.collocation.size(); ++i) pool.emplace_back(kColl, i);
  // sample_points puts the origin first in the boundary set.
  const bool anchored = cfg.anchor_origin && !sets.boundary.empty() &&
                        sets.boundary.front().target == 0.0 &&
                        std::all_of(sets.boundary.front().x.begin(), sets.boundary.front().x.end(),
                                    [](double v) { return v == 0.0; });
  for (std::uint32_t i = anchored ? 1 : 0; i < sets.boundary.size(); ++i) pool.emplace_back(kBound, i);
  for (std::uint32_t i = 0; i < sets.data.size(); ++i) pool.emplace_back(kData, i);

  std::vector<double> theta = net.flatten();
  std::vector<double> grad(theta.size());
  Adam adam(theta.size(), cfg.adam);
  Batch batch;

  for (std::size_t epoch = 0; epoch < cfg.epochs && !pool.empty(); ++epoch) {
    Rng rng(stream_seed(cfg.seed, kShuffleStream + epoch));
    for (std::size_t i = pool.size(); i > 1; --i) std::swap(pool[i - 1], pool[rng.below(i)]);

    EpochStats stats;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < pool.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(pool.size(), start + cfg.batch_size);
      batch.collocation.clear();
      batch.boundary.clear();
      batch.data.clear();
      if (anchored) batch.boundary.push_back(&sets.boundary.front());
      for (std::size_t k = start; k < stop; ++k) {
        const auto [kind, idx] = pool[k];
        if (kind == kColl) batch.collocation.push_back(&sets.collocation[idx]);
        else if (kind == kBound) batch.boundary.push_back(&sets.boundary[idx]);
        else batch.data.push_back(&sets.data[idx]);
      }
      LossValue lv;
      try {
        lv = loss(net, sys, tr, cfg, batch, grad);
      } catch (const NumericError& e) {
        report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        throw TrainingDivergence(std::string("training diverged: ") + e.what(), report);
      }
      if (!(lv.total() <= kDivergenceThreshold)) {
        report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        throw TrainingDivergence("training diverged: batch loss " + std::to_string(lv.total()) +
                                     " in epoch " + std::to_string(epoch + 1),
                                 report);
      }
      stats.residual += lv.residual;
      stats.boundary += lv.boundary;
      stats.data += lv.data;
      ++batches;
      adam.step(theta, grad);
      net.assign(theta);
      ++report.steps;
    }
    const double inv = 1.0 / static_cast<double>(batches);
    stats.residual *= inv;
    stats.boundary *= inv;
    stats.data *= inv;
    stats.loss = stats.residual + stats.boundary + stats.data;
    stats.validation = validation_loss(net);
    report.epochs.push_back(stats);
    if (stats.validation < report.best_validation) {
      report.best_validation = stats.validation;
      report.best_epoch = epoch + 1;
      best = net;
    }
  }

  const auto grid = held_out_grid(sys.domain(), cfg.eval_grid_points);
  report.grid_points = grid.size();
  report.eps_hat = max_abs_residual(sys, tr, cfg.pde, best, grid);
  ForwardTape tape;
  for (const auto& p : sets.boundary)
    report.eps_hat_b = std::max(report.eps_hat_b, std::fabs(forward(best, p.x, tape) - p.target));
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {std::move(best), std::move(report)};
}

}  // namespace nlyap
