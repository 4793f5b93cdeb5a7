#include "nlyap/odeint.hpp"

#include <algorithm>
#include <cmath>

#include "nlyap/errors.hpp"

namespace nlyap {

namespace {

// Dormand-Prince 5(4) tableau. The field is autonomous, so stage times are unused.
constexpr double a21 = 1.0 / 5.0;
constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0,
                 a54 = -212.0 / 729.0;
constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0,
                 a64 = 49.0 / 176.0, a65 = -5103.0 / 18656.0;
constexpr double a71 = 35.0 / 384.0, a73 = 500.0 / 1113.0, a74 = 125.0 / 192.0,
                 a75 = -2187.0 / 6784.0, a76 = 11.0 / 84.0;
// b - bhat for the embedded error estimate.
constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                 e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;

constexpr double kMinStep = 1e-14;

class Stepper {
 public:
  Stepper(const VectorFieldSpec& sys, const ScalarField* omega)
      : sys_(sys), omega_(omega), n_(sys.dim()), m_(n_ + (omega ? 1 : 0)) {
    for (auto* k : {&k1_, &k2_, &k3_, &k4_, &k5_, &k6_, &k7_, &tmp_, &ynew_, &err_})
      k->assign(m_, 0.0);
  }

  std::size_t size() const { return m_; }

  void rhs(std::span<const double> y, std::span<double> dy) const {
    sys_.eval_f(y.first(n_), dy.first(n_));
    if (omega_) dy[n_] = (*omega_)(y.first(n_));
  }

  // One step of size h from y with k1 = f(y). Fills ynew_, k7_ = f(ynew) and
  // returns the scaled RMS error estimate.
  double step(std::span<const double> y, double h, double rtol, double atol) {
    auto stage = [&](std::vector<double>& out, auto&& combo) {
      for (std::size_t i = 0; i < m_; ++i) tmp_[i] = y[i] + h * combo(i);
      rhs(tmp_, out);
    };
    stage(k2_, [&](std::size_t i) { return a21 * k1_[i]; });
    stage(k3_, [&](std::size_t i) { return a31 * k1_[i] + a32 * k2_[i]; });
    stage(k4_, [&](std::size_t i) { return a41 * k1_[i] + a42 * k2_[i] + a43 * k3_[i]; });
    stage(k5_, [&](std::size_t i) {
      return a51 * k1_[i] + a52 * k2_[i] + a53 * k3_[i] + a54 * k4_[i];
    });
    stage(k6_, [&](std::size_t i) {
      return a61 * k1_[i] + a62 * k2_[i] + a63 * k3_[i] + a64 * k4_[i] + a65 * k5_[i];
    });
    for (std::size_t i = 0; i < m_; ++i)
      ynew_[i] = y[i] + h * (a71 * k1_[i] + a73 * k3_[i] + a74 * k4_[i] + a75 * k5_[i] +
                             a76 * k6_[i]);
    rhs(ynew_, k7_);
    double sum = 0.0;
    for (std::size_t i = 0; i < m_; ++i) {
      err_[i] = h * (e1 * k1_[i] + e3 * k3_[i] + e4 * k4_[i] + e5 * k5_[i] + e6 * k6_[i] +
                     e7 * k7_[i]);
      const double sc = atol + rtol * std::max(std::fabs(y[i]), std::fabs(ynew_[i]));
      sum += (err_[i] / sc) * (err_[i] / sc);
    }
    const double e = std::sqrt(sum / static_cast<double>(m_));
    return std::isfinite(e) ? e : std::numeric_limits<double>::infinity();
  }

  std::vector<double>& k1() { return k1_; }
  std::vector<double>& k7() { return k7_; }
  const std::vector<double>& ynew() const { return ynew_; }

 private:
  const VectorFieldSpec& sys_;
  const ScalarField* omega_;
  std::size_t n_, m_;
  std::vector<double> k1_, k2_, k3_, k4_, k5_, k6_, k7_, tmp_, ynew_, err_;
};

double state_norm(std::span<const double> y, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += y[i] * y[i];
  return std::sqrt(s);
}

// Initial step guess (Hairer, Norsett & Wanner, II.4).
double initial_step(Stepper& st, std::span<const double> y, const IntegratorConfig& cfg) {
  const std::size_t m = st.size();
  double d0 = 0.0, d1 = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double sc = cfg.abs_tol + cfg.rel_tol * std::fabs(y[i]);
    d0 += (y[i] / sc) * (y[i] / sc);
    d1 += (st.k1()[i] / sc) * (st.k1()[i] / sc);
  }
  d0 = std::sqrt(d0 / m);
  d1 = std::sqrt(d1 / m);
  double h = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
  return std::min(h, cfg.max_time);
}

TrajectoryOutcome run(const VectorFieldSpec& sys, const ScalarField* omega,
                      std::span<const double> x0, const IntegratorConfig& cfg,
                      const std::optional<Eigen::MatrixXd>& tail,
                      const TrajectoryObserver& observer) {
  const std::size_t n = sys.dim();
  if (x0.size() != n) throw ArgumentError("integrate: x0 has wrong dimension");
  cfg.validate(sys.domain());
  const BoxRegion escape_box = sys.domain().inflated(cfg.escape_factor);
  if (!escape_box.contains(x0)) throw ArgumentError("integrate: x0 outside the inflated domain");

  Stepper st(sys, omega);
  std::vector<double> y(st.size(), 0.0);
  std::copy(x0.begin(), x0.end(), y.begin());

  TrajectoryOutcome out;
  auto finish = [&](TrajectoryStatus status, double t) {
    out.status = status;
    out.final_time = t;
    out.final_state.assign(y.begin(), y.begin() + n);
    out.value_integral = omega ? y[n] : 0.0;
    if (status == TrajectoryStatus::Converged && omega && tail) {
      Eigen::Map<const Eigen::VectorXd> xf(out.final_state.data(), n);
      out.value_integral += xf.dot(*tail * xf);
    }
    return out;
  };

  double t = 0.0;
  if (observer) observer(t, std::span<const double>(y).first(n));
  if (state_norm(y, n) <= cfg.converge_radius) return finish(TrajectoryStatus::Converged, t);

  st.rhs(y, st.k1());
  double h = initial_step(st, y, cfg);
  double facold = 1e-4;
  constexpr double beta = 0.04, expo1 = 0.2 - beta * 0.75, safe = 0.9;
  constexpr double fac_min = 0.2, fac_max = 10.0;

  while (true) {
    const double remaining = cfg.max_time - t;
    if (remaining <= 1e-12 * std::max(1.0, cfg.max_time) || out.steps >= cfg.max_steps)
      return finish(TrajectoryStatus::TimedOut, t);
    h = std::min(h, remaining);
    if (h < kMinStep) {
      finish(TrajectoryStatus::TimedOut, t);
      throw IntegrationError("integrate: step size underflow at t=" + std::to_string(t), out);
    }
    const double err = st.step(y, h, cfg.rel_tol, cfg.abs_tol);
    if (err > 1.0) {
      const double fac11 = std::isfinite(err) ? std::pow(err, expo1) : 1.0 / fac_min;
      h /= std::min(1.0 / fac_min, fac11 / safe);
      continue;
    }
    // Accepted.
    const std::vector<double> y_old = y;
    const double h_taken = h;
    y = st.ynew();
    t += h_taken;
    ++out.steps;
    const double fac11 = std::pow(std::max(err, 1e-16), expo1);
    double fac = fac11 / std::pow(facold, beta);
    fac = std::clamp(fac / safe, 1.0 / fac_max, 1.0 / fac_min);
    facold = std::max(err, 1e-4);
    h = h_taken / fac;
    std::swap(st.k1(), st.k7());

    if (state_norm(y, n) <= cfg.converge_radius) {
      // Bisect the last step for the first crossing of the convergence ball.
      double lo = 0.0, hi = 1.0;
      std::vector<double> best = y;
      std::vector<double> probe_k1(st.size());
      st.rhs(y_old, probe_k1);
      for (int it = 0; it < 40; ++it) {
        const double s = 0.5 * (lo + hi);
        st.k1() = probe_k1;
        st.step(y_old, s * h_taken, cfg.rel_tol, cfg.abs_tol);
        if (state_norm(st.ynew(), n) <= cfg.converge_radius) {
          hi = s;
          best = st.ynew();
        } else {
          lo = s;
        }
      }
      y = best;
      t = t - h_taken + hi * h_taken;
      if (observer) observer(t, std::span<const double>(y).first(n));
      return finish(TrajectoryStatus::Converged, t);
    }
    if (observer) observer(t, std::span<const double>(y).first(n));
    if (!escape_box.contains(std::span<const double>(y).first(n)))
      return finish(TrajectoryStatus::Escaped, t);
  }
}

}  // namespace

void IntegratorConfig::validate(const BoxRegion& domain) const {
  if (!(rel_tol > 0.0) || !(abs_tol > 0.0)) throw ArgumentError("IntegratorConfig: tolerances must be positive");
  if (!(max_time > 0.0)) throw ArgumentError("IntegratorConfig: max_time must be positive");
  if (!(escape_factor >= 1.0)) throw ArgumentError("IntegratorConfig: escape_factor must be >= 1");
  if (max_steps <= 0) throw ArgumentError("IntegratorConfig: max_steps must be positive");
  double min_half = std::numeric_limits<double>::infinity();
  for (const auto& s : domain.sides()) min_half = std::min(min_half, 0.5 * s.width());
  if (!(converge_radius > 0.0) || !(converge_radius < min_half))
    throw ArgumentError("IntegratorConfig: converge_radius must lie in (0, smallest half-width)");
}

std::string to_string(TrajectoryStatus s) {
  switch (s) {
    case TrajectoryStatus::Converged: return "converged";
    case TrajectoryStatus::Escaped: return "escaped";
    case TrajectoryStatus::TimedOut: return "timed_out";
  }
  return "unknown";
}

TrajectoryOutcome integrate(const VectorFieldSpec& sys, std::span<const double> x0,
                            const IntegratorConfig& cfg, const TrajectoryObserver& observer) {
  return run(sys, nullptr, x0, cfg, std::nullopt, observer);
}

TrajectoryOutcome integrate_with_value(const VectorFieldSpec& sys, const ScalarField& omega,
                                       std::span<const double> x0, const IntegratorConfig& cfg,
                                       const std::optional<Eigen::MatrixXd>& tail,
                                       const TrajectoryObserver& observer) {
  if (!omega) throw ArgumentError("integrate_with_value: omega is empty");
  return run(sys, &omega, x0, cfg, tail, observer);
}

}  // namespace nlyap
