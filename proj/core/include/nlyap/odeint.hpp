#pragma once

// Adaptive Dormand-Prince 5(4) integration of trajectories, optionally
// augmented with the running value integral v' = omega(x).

#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nlyap/dynamics.hpp"

namespace nlyap {

struct IntegratorConfig {
  double rel_tol = 1e-8;
  double abs_tol = 1e-10;
  double max_time = 100.0;
  double converge_radius = 1e-3;
  /// Escape is declared outside the domain box inflated by this factor.
  double escape_factor = 2.0;
  long long max_steps = 1'000'000;

  /// Throws ArgumentError when a field is out of range for `domain`.
  void validate(const BoxRegion& domain) const;
};

enum class TrajectoryStatus { Converged, Escaped, TimedOut };

std::string to_string(TrajectoryStatus s);

struct TrajectoryOutcome {
  TrajectoryStatus status = TrajectoryStatus::TimedOut;
  std::vector<double> final_state;
  double final_time = 0.0;
  /// Integral of omega along the trajectory up to final_time, plus the
  /// quadratic tail when one was supplied and the trajectory converged.
  double value_integral = 0.0;
  long long steps = 0;
};

class IntegrationError : public std::runtime_error {
 public:
  IntegrationError(const std::string& what, TrajectoryOutcome partial)
      : std::runtime_error(what), partial_(std::move(partial)) {}
  const TrajectoryOutcome& partial() const { return partial_; }

 private:
  TrajectoryOutcome partial_;
};

using ScalarField = std::function<double(std::span<const double>)>;
/// Called after every accepted step with (t, x).
using TrajectoryObserver = std::function<void(double, std::span<const double>)>;

TrajectoryOutcome integrate(const VectorFieldSpec& sys, std::span<const double> x0,
                            const IntegratorConfig& cfg,
                            const TrajectoryObserver& observer = {});

/// Integrates (x' = f, v' = omega(x)). When the trajectory converges and
/// `tail` is given, x(tau)ᵀ tail x(tau) is added to the value integral to
/// close the infinite-horizon remainder.
TrajectoryOutcome integrate_with_value(const VectorFieldSpec& sys, const ScalarField& omega,
                                       std::span<const double> x0, const IntegratorConfig& cfg,
                                       const std::optional<Eigen::MatrixXd>& tail = std::nullopt,
                                       const TrajectoryObserver& observer = {});

}  // namespace nlyap
