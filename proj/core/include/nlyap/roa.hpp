#pragma once

// Region-of-attraction search over sublevel sets of W, the simulation-based
// DoA oracle and volume ratios.

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "nlyap/candidate.hpp"
#include "nlyap/dynamics.hpp"
#include "nlyap/odeint.hpp"
#include "nlyap/verify.hpp"

namespace nlyap {

/// Uniform samples of X labelled by simulation.
struct DoaSamples {
  std::size_t dim = 0;
  std::vector<double> points;  // row-major, dim per sample
  std::vector<TrajectoryStatus> labels;
  std::uint64_t seed = 0;

  std::size_t size() const { return labels.size(); }
  std::span<const double> point(std::size_t i) const { return {points.data() + i * dim, dim}; }
  std::size_t count(TrajectoryStatus s) const;
  /// Converged / (Converged + Escaped).
  double inside_fraction() const;
};

/// Needs n_samples >= 1e4. Sample i uses stream_seed(seed, i). Integration
/// failures count as TimedOut, which is left out of every ratio.
DoaSamples estimate_doa(const VectorFieldSpec& sys, const IntegratorConfig& cfg,
                        std::size_t n_samples, std::uint64_t seed);

struct VolumeStats {
  double ratio = 0.0;           // inside_below / inside
  std::size_t inside = 0;       // converged samples
  std::size_t inside_below = 0; // converged samples with W <= level
  std::size_t outside_below = 0;  // escaped samples with W <= level (must be 0 when certified)
};

/// Share of the in-DoA samples with W <= level. Throws ArgumentError when no
/// sample is in the DoA.
VolumeStats volume_ratio(const CandidateFunction& w, double level, const DoaSamples& doa);
/// The same for the quadratic sublevel set {xᵀ P x <= c}.
VolumeStats quadratic_volume_ratio(const Eigen::MatrixXd& P, double c, const DoaSamples& doa);

struct RoaOptions {
  CheckOptions check;
  double eps = 1e-4;
  int c1_iterations = 20;
  int c2_iterations = 20;
  double level_max = 1.0;  // upper end of both level searches
};

struct RoaResult {
  double c1 = 0.0;
  double c2 = 0.0;
  Certificate certificate;
  bool volume_computed = false;
  double volume_ratio = 0.0;
  std::size_t doa_sample_count = 0;
  double quadratic_baseline_ratio = 0.0;
  std::size_t outside_below = 0;

  nlohmann::json to_json() const;
};

class RoaSearchFailure : public VerificationFailure {
 public:
  using VerificationFailure::VerificationFailure;
};

/// c1 is the largest level (bisection) with W <= c1 => xᵀ P x <= c; c2 the
/// largest level above c1 (bisection) for which the band and shell
/// conditions certify. Volumes are filled in when `doa` is given. Throws
/// RoaSearchFailure with the last failing certificate when no c2 > c1
/// certifies.
RoaResult search_max_level(const VectorFieldSpec& sys, std::shared_ptr<const CandidateFunction> w,
                           const Eigen::MatrixXd& P, double c, const BoxRegion& X,
                           const RoaOptions& opts = {}, const DoaSamples* doa = nullptr);

/// Regular grid on the plane of two coordinates with the others fixed.
struct GridSlice {
  std::size_t axis_x = 0;
  std::size_t axis_y = 1;
  std::size_t resolution = 101;
  std::vector<double> fixed;  // full point; the two axes are overwritten
};

/// CSV rows (slice coordinates, W, dW/dt, in_doa) over the slice of the
/// domain; in_doa is 1, 0, or -1 when the simulation timed out. One-dimensional
/// systems give a line of `resolution` rows.
void write_level_grid(std::ostream& os, const VectorFieldSpec& sys, const CandidateFunction& w,
                      const GridSlice& slice, const IntegratorConfig& cfg);

}  // namespace nlyap
