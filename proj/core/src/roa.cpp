#include "nlyap/roa.hpp"

#include <cmath>
#include <ostream>

#include "nlyap/errors.hpp"
#include "nlyap/rng.hpp"

namespace nlyap {

std::size_t DoaSamples::count(TrajectoryStatus s) const {
  std::size_t c = 0;
  for (auto l : labels) c += l == s ? 1 : 0;
  return c;
}

double DoaSamples::inside_fraction() const {
  const auto in = count(TrajectoryStatus::Converged);
  const auto out = count(TrajectoryStatus::Escaped);
  return in + out == 0 ? 0.0 : static_cast<double>(in) / static_cast<double>(in + out);
}

DoaSamples estimate_doa(const VectorFieldSpec& sys, const IntegratorConfig& cfg,
                        std::size_t n_samples, std::uint64_t seed) {
  if (n_samples < 10000) throw ArgumentError("estimate_doa: need at least 1e4 samples");
  cfg.validate(sys.domain());
  DoaSamples doa;
  doa.dim = sys.dim();
  doa.seed = seed;
  doa.points.resize(n_samples * doa.dim);
  doa.labels.resize(n_samples);
  for (std::size_t i = 0; i < n_samples; ++i) {
    Rng rng(stream_seed(seed, i));
    std::span<double> z(doa.points.data() + i * doa.dim, doa.dim);
    rng.fill_uniform(sys.domain(), z);
    try {
      doa.labels[i] = integrate(sys, z, cfg).status;
    } catch (const IntegrationError&) {
      doa.labels[i] = TrajectoryStatus::TimedOut;
    }
  }
  return doa;
}

namespace {

template <class Below>
VolumeStats count_below(const DoaSamples& doa, Below below) {
  VolumeStats st;
  for (std::size_t i = 0; i < doa.size(); ++i) {
    const auto l = doa.labels[i];
    if (l == TrajectoryStatus::TimedOut) continue;
    const bool b = below(doa.point(i));
    if (l == TrajectoryStatus::Converged) {
      ++st.inside;
      st.inside_below += b ? 1 : 0;
    } else {
      st.outside_below += b ? 1 : 0;
    }
  }
  if (st.inside == 0) throw ArgumentError("volume_ratio: no sample lies in the domain of attraction");
  st.ratio = static_cast<double>(st.inside_below) / static_cast<double>(st.inside);
  return st;
}

}  // namespace

VolumeStats volume_ratio(const CandidateFunction& w, double level, const DoaSamples& doa) {
  if (doa.size() == 0) throw ArgumentError("volume_ratio: empty classifier");
  if (w.dim() != doa.dim) throw ArgumentError("volume_ratio: dimension mismatch");
  return count_below(doa, [&](std::span<const double> x) { return w.value(x) <= level; });
}

VolumeStats quadratic_volume_ratio(const Eigen::MatrixXd& P, double c, const DoaSamples& doa) {
  if (doa.size() == 0) throw ArgumentError("volume_ratio: empty classifier");
  if (static_cast<std::size_t>(P.rows()) != doa.dim) throw ArgumentError("volume_ratio: dimension mismatch");
  return count_below(doa, [&](std::span<const double> x) {
    Eigen::Map<const Eigen::VectorXd> v(x.data(), static_cast<Eigen::Index>(x.size()));
    return v.dot(P * v) <= c;
  });
}

nlohmann::json RoaResult::to_json() const {
  nlohmann::json j{{"c1", c1},
                   {"c2", c2},
                   {"certificate", certificate.to_json()},
                   {"volume_computed", volume_computed}};
  if (volume_computed) {
    j["volume_ratio"] = volume_ratio;
    j["doa_sample_count"] = doa_sample_count;
    j["quadratic_baseline_ratio"] = quadratic_baseline_ratio;
    j["outside_doa_below_c2"] = outside_below;
  }
  return j;
}

RoaResult search_max_level(const VectorFieldSpec& sys, std::shared_ptr<const CandidateFunction> w,
                           const Eigen::MatrixXd& P, double c, const BoxRegion& X,
                           const RoaOptions& opts, const DoaSamples* doa) {
  if (!w || w->dim() != sys.dim()) throw ArgumentError("search_max_level: dimension mismatch");
  if (!(c > 0.0)) throw ArgumentError("search_max_level: local level c must be positive");
  if (!(opts.level_max > 0.0) || opts.c1_iterations < 1 || opts.c2_iterations < 1)
    throw ArgumentError("search_max_level: invalid options");

  // c1: largest level whose sublevel set sits inside the quadratic ROA.
  std::optional<double> c1;
  Certificate last;
  {
    double lo = 0.0, hi = opts.level_max;
    for (int it = 0; it < opts.c1_iterations; ++it) {
      const double mid = 0.5 * (lo + hi);
      Certificate cert = verify_inner_condition(w, P, c, mid, X, opts.check);
      if (cert.certified()) {
        lo = mid;
        c1 = mid;
      } else {
        hi = mid;
        last = std::move(cert);
      }
    }
  }
  if (!c1) throw RoaSearchFailure("ROA search failed: no level c1 certifies W <= c1 => x'Px <= c", last);

  auto band_and_shell = [&](double c2) {
    std::vector<Certificate> parts;
    parts.push_back(verify_band_condition(sys, w, *c1, c2, opts.eps, X, opts.check));
    if (parts.back().certified()) parts.push_back(verify_shell_condition(w, c2, X, opts.check));
    return conjoin("band and shell conditions", std::move(parts));
  };

  std::optional<double> c2;
  {
    Certificate top = band_and_shell(opts.level_max);
    if (top.certified()) {
      c2 = opts.level_max;
    } else {
      last = std::move(top);
      double lo = *c1, hi = opts.level_max;
      for (int it = 0; it < opts.c2_iterations; ++it) {
        const double mid = 0.5 * (lo + hi);
        Certificate cert = band_and_shell(mid);
        if (cert.certified()) {
          lo = mid;
          c2 = mid;
        } else {
          hi = mid;
          last = std::move(cert);
        }
      }
    }
  }
  if (!c2) throw RoaSearchFailure("ROA search failed: no level c2 > c1 certifies", last);

  RoaResult res;
  res.c1 = *c1;
  res.c2 = *c2;
  res.certificate = verify_roa_conditions(sys, w, P, c, res.c1, res.c2, opts.eps, X, opts.check);
  if (!res.certificate.certified())
    throw RoaSearchFailure("ROA search failed: final certificate did not re-certify", res.certificate);
  if (doa) {
    const VolumeStats v = volume_ratio(*w, res.c2, *doa);
    res.volume_computed = true;
    res.volume_ratio = v.ratio;
    res.doa_sample_count = v.inside;
    res.outside_below = v.outside_below;
    res.quadratic_baseline_ratio = quadratic_volume_ratio(P, c, *doa).ratio;
  }
  return res;
}

void write_level_grid(std::ostream& os, const VectorFieldSpec& sys, const CandidateFunction& w,
                      const GridSlice& slice, const IntegratorConfig& cfg) {
  const std::size_t n = sys.dim();
  if (slice.resolution == 0) throw ArgumentError("export-grid: resolution must be positive");
  if (w.dim() != n) throw ArgumentError("export-grid: candidate dimension mismatch");
  const bool planar = n >= 2;
  if (slice.axis_x >= n || (planar && (slice.axis_y >= n || slice.axis_y == slice.axis_x)))
    throw ArgumentError("export-grid: invalid slice axes");
  std::vector<double> x = slice.fixed.empty() ? std::vector<double>(n, 0.0) : slice.fixed;
  if (x.size() != n) throw ArgumentError("export-grid: fixed point has wrong dimension");
  cfg.validate(sys.domain());

  const BoxRegion& X = sys.domain();
  auto node = [&](std::size_t axis, std::size_t k) {
    if (slice.resolution == 1) return X[axis].mid();
    return X[axis].lo() + X[axis].width() * static_cast<double>(k) /
                              static_cast<double>(slice.resolution - 1);
  };
  os << "x_" << slice.axis_x + 1 << ',';
  if (planar) os << "x_" << slice.axis_y + 1 << ',';
  os << "W,dW,in_doa\n";
  const auto old_precision = os.precision(17);
  std::vector<double> g(n), f(n);
  const std::size_t rows_y = planar ? slice.resolution : 1;
  for (std::size_t j = 0; j < rows_y; ++j) {
    for (std::size_t i = 0; i < slice.resolution; ++i) {
      x[slice.axis_x] = node(slice.axis_x, i);
      if (planar) x[slice.axis_y] = node(slice.axis_y, j);
      const double wv = w.value_and_gradient(x, g);
      sys.eval_f(x, f);
      double lie = 0.0;
      for (std::size_t k = 0; k < n; ++k) lie += g[k] * f[k];
      int in = -1;
      try {
        const auto st = integrate(sys, x, cfg).status;
        in = st == TrajectoryStatus::Converged ? 1 : st == TrajectoryStatus::Escaped ? 0 : -1;
      } catch (const IntegrationError&) {
      }
      os << x[slice.axis_x] << ',';
      if (planar) os << x[slice.axis_y] << ',';
      os << wv << ',' << lie << ',' << in << '\n';
    }
  }
  os.precision(old_precision);
}

}  // namespace nlyap
