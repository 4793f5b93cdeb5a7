#include "nlyap/interval.hpp"

#include <algorithm>
#include <cassert>
#include <numbers>
#include <ostream>
#include <stdexcept>

#include "nlyap/errors.hpp"

namespace nlyap {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kUnit = std::numeric_limits<double>::epsilon() / 2.0;
constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kHalfPi = 0.5 * std::numbers::pi;

double down2(double x) { return round_down(round_down(x)); }
double up2(double x) { return round_up(round_up(x)); }

// Sum with rigorous directed bounds. TwoSum recovers the exact error when
// no overflow happens.
void add_bounds(double a, double b, double& lo, double& hi) {
  const double s = a + b;
  if (!std::isfinite(s)) {
    lo = round_down(s);
    hi = round_up(s);
    if (std::isnan(s)) {
      lo = -kInf;
      hi = kInf;
    }
    return;
  }
  const double bb = s - a;
  const double err = (a - (s - bb)) + (b - bb);
  lo = err < 0.0 ? round_down(s) : s;
  hi = err > 0.0 ? round_up(s) : s;
}

// Product with 0 * inf treated as 0.
double mul_down(double a, double b) {
  if (a == 0.0 || b == 0.0) return 0.0;
  const double p = a * b;
  if (!std::isfinite(p) || std::fabs(p) < 1e-290) return round_down(p);
  const double e = std::fma(a, b, -p);
  return e < 0.0 ? round_down(p) : p;
}

double mul_up(double a, double b) {
  if (a == 0.0 || b == 0.0) return 0.0;
  const double p = a * b;
  if (!std::isfinite(p) || std::fabs(p) < 1e-290) return round_up(p);
  const double e = std::fma(a, b, -p);
  return e > 0.0 ? round_up(p) : p;
}

Interval clamp_unit(double lo, double hi) {
  return {std::max(lo, -1.0), std::min(hi, 1.0)};
}

// True when some point t0 + k*period (k integer) may lie in [lo, hi].
// Errs on the side of answering true.
bool may_contain_periodic(double lo, double hi, double t0) {
  const double slack = 8.0 * kUnit * (1.0 + std::max(std::fabs(lo), std::fabs(hi)));
  const double k = std::ceil((lo - t0) / kTwoPi);
  for (double kk : {k - 1.0, k, k + 1.0}) {
    const double t = t0 + kk * kTwoPi;
    if (t >= lo - slack && t <= hi + slack) return true;
  }
  return false;
}

}  // namespace

double round_down(double x) {
  if (std::isnan(x)) return -kInf;
  return std::nextafter(x, -kInf);
}

double round_up(double x) {
  if (std::isnan(x)) return kInf;
  return std::nextafter(x, kInf);
}

Interval::Interval(double lo, double hi) : lo_(lo), hi_(hi) {
  if (std::isnan(lo) || std::isnan(hi)) {
    lo_ = -kInf;
    hi_ = kInf;
  } else if (lo > hi) {
    throw std::invalid_argument("Interval: lo > hi");
  }
}

Interval Interval::entire() { return {-kInf, kInf}; }

double Interval::mid() const {
  if (lo_ == -kInf && hi_ == kInf) return 0.0;
  if (lo_ == -kInf) return -std::numeric_limits<double>::max();
  if (hi_ == kInf) return std::numeric_limits<double>::max();
  return 0.5 * lo_ + 0.5 * hi_;
}

std::ostream& operator<<(std::ostream& os, const Interval& x) {
  return os << '[' << x.lo() << ", " << x.hi() << ']';
}

Interval operator+(const Interval& a, const Interval& b) {
  double lo, hi, unused;
  add_bounds(a.lo_, b.lo_, lo, unused);
  add_bounds(a.hi_, b.hi_, unused, hi);
  return {lo, hi};
}

Interval operator-(const Interval& a, const Interval& b) { return a + (-b); }

Interval operator*(const Interval& a, const Interval& b) {
  const double lo = std::min({mul_down(a.lo_, b.lo_), mul_down(a.lo_, b.hi_),
                              mul_down(a.hi_, b.lo_), mul_down(a.hi_, b.hi_)});
  const double hi = std::max({mul_up(a.lo_, b.lo_), mul_up(a.lo_, b.hi_),
                              mul_up(a.hi_, b.lo_), mul_up(a.hi_, b.hi_)});
  return {lo, hi};
}

Interval operator/(const Interval& a, const Interval& b) {
  if (b.lo_ > 0.0 || b.hi_ < 0.0) {
    const double q[4] = {a.lo_ / b.lo_, a.lo_ / b.hi_, a.hi_ / b.lo_, a.hi_ / b.hi_};
    double lo = kInf, hi = -kInf;
    for (double v : q) {
      if (std::isnan(v)) return Interval::entire();
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    return {round_down(lo), round_up(hi)};
  }
  // Divisor touches zero: hull of the extended-interval quotient.
  if (b.lo_ == 0.0 && b.hi_ > 0.0) {
    if (a.lo_ >= 0.0) return {a.lo_ == 0.0 ? 0.0 : round_down(a.lo_ / b.hi_), kInf};
    if (a.hi_ <= 0.0) return {-kInf, a.hi_ == 0.0 ? 0.0 : round_up(a.hi_ / b.hi_)};
  }
  if (b.hi_ == 0.0 && b.lo_ < 0.0) {
    if (a.lo_ >= 0.0) return {-kInf, a.lo_ == 0.0 ? 0.0 : round_up(a.lo_ / b.lo_)};
    if (a.hi_ <= 0.0) return {a.hi_ == 0.0 ? 0.0 : round_down(a.hi_ / b.lo_), kInf};
  }
  return Interval::entire();
}

Interval sqr(const Interval& x) {
  const double l = std::fabs(x.lo()), h = std::fabs(x.hi());
  const double big = std::max(l, h);
  if (x.contains_zero()) return {0.0, mul_up(big, big)};
  const double small = std::min(l, h);
  return {mul_down(small, small), mul_up(big, big)};
}

Interval powi(const Interval& x, int k) {
  if (k == 0) return Interval(1.0);
  if (k == 1) return x;
  if (k == 2) return sqr(x);
  if (k < 0) return Interval(1.0) / powi(x, -k);
  if (k % 2 == 0) {
    const double l = std::fabs(x.lo()), h = std::fabs(x.hi());
    const double big = std::pow(std::max(l, h), k);
    const double small = x.contains_zero() ? 0.0 : std::pow(std::min(l, h), k);
    return {small == 0.0 ? 0.0 : std::max(0.0, down2(small)), up2(big)};
  }
  return {down2(std::pow(x.lo(), k)), up2(std::pow(x.hi(), k))};
}

Interval sqrt(const Interval& x) {
  if (x.hi() < 0.0) return Interval::entire();
  const double lo = std::max(x.lo(), 0.0);
  return {lo == 0.0 ? 0.0 : std::max(0.0, round_down(std::sqrt(lo))),
          round_up(std::sqrt(x.hi()))};
}

Interval exp(const Interval& x) {
  return {std::max(0.0, down2(std::exp(x.lo()))), up2(std::exp(x.hi()))};
}

Interval tanh(const Interval& x) {
  return clamp_unit(down2(std::tanh(x.lo())), up2(std::tanh(x.hi())));
}

Interval sin(const Interval& x) {
  if (!x.is_finite() || x.width() >= kTwoPi || x.mag() > 1e8) return {-1.0, 1.0};
  const double a = std::sin(x.lo()), b = std::sin(x.hi());
  double lo = down2(std::min(a, b)), hi = up2(std::max(a, b));
  if (may_contain_periodic(x.lo(), x.hi(), kHalfPi)) hi = 1.0;
  if (may_contain_periodic(x.lo(), x.hi(), -kHalfPi)) lo = -1.0;
  return clamp_unit(lo, hi);
}

Interval cos(const Interval& x) {
  if (!x.is_finite() || x.width() >= kTwoPi || x.mag() > 1e8) return {-1.0, 1.0};
  const double a = std::cos(x.lo()), b = std::cos(x.hi());
  double lo = down2(std::min(a, b)), hi = up2(std::max(a, b));
  if (may_contain_periodic(x.lo(), x.hi(), 0.0)) hi = 1.0;
  if (may_contain_periodic(x.lo(), x.hi(), std::numbers::pi)) lo = -1.0;
  return clamp_unit(lo, hi);
}

Interval abs(const Interval& x) {
  if (x.lo() >= 0.0) return x;
  if (x.hi() <= 0.0) return -x;
  return {0.0, x.mag()};
}

Interval min(const Interval& a, const Interval& b) {
  return {std::min(a.lo(), b.lo()), std::min(a.hi(), b.hi())};
}

Interval max(const Interval& a, const Interval& b) {
  return {std::max(a.lo(), b.lo()), std::max(a.hi(), b.hi())};
}

Interval intersect(const Interval& a, const Interval& b) {
  const double lo = std::max(a.lo(), b.lo()), hi = std::min(a.hi(), b.hi());
  if (lo > hi) throw NumericError("intersect: disjoint enclosures");
  return {lo, hi};
}

Interval hull(const Interval& a, const Interval& b) {
  return {std::min(a.lo(), b.lo()), std::max(a.hi(), b.hi())};
}

// ---------------------------------------------------------------------------
// BoxRegion

BoxRegion::BoxRegion(std::vector<Interval> sides) : sides_(std::move(sides)) {
  if (sides_.empty()) throw std::invalid_argument("BoxRegion: empty");
  for (const auto& s : sides_)
    if (!s.is_finite()) throw std::invalid_argument("BoxRegion: infinite side");
}

BoxRegion::BoxRegion(std::span<const double> lo, std::span<const double> hi) {
  if (lo.size() != hi.size() || lo.empty())
    throw std::invalid_argument("BoxRegion: bound size mismatch");
  sides_.reserve(lo.size());
  for (std::size_t i = 0; i < lo.size(); ++i) sides_.emplace_back(lo[i], hi[i]);
  *this = BoxRegion(std::move(sides_));
}

BoxRegion BoxRegion::cube(std::size_t dim, double half_width) {
  return BoxRegion(std::vector<Interval>(dim, Interval(-half_width, half_width)));
}

std::vector<double> BoxRegion::center() const {
  std::vector<double> c(sides_.size());
  for (std::size_t i = 0; i < sides_.size(); ++i) c[i] = sides_[i].mid();
  return c;
}

std::size_t BoxRegion::widest_dimension() const {
  std::size_t best = 0;
  for (std::size_t i = 1; i < sides_.size(); ++i)
    if (sides_[i].width() > sides_[best].width()) best = i;
  return best;
}

double BoxRegion::max_width() const { return sides_[widest_dimension()].width(); }

double BoxRegion::volume() const {
  double v = 1.0;
  for (const auto& s : sides_) v *= s.width();
  return v;
}

bool BoxRegion::contains(std::span<const double> x) const {
  if (x.size() != sides_.size()) return false;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (!sides_[i].contains(x[i])) return false;
  return true;
}

bool BoxRegion::contains_strictly(std::span<const double> x) const {
  if (x.size() != sides_.size()) return false;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (!(sides_[i].lo() < x[i] && x[i] < sides_[i].hi())) return false;
  return true;
}

std::pair<BoxRegion, BoxRegion> BoxRegion::bisect(std::size_t axis) const {
  BoxRegion left = *this, right = *this;
  const double m = sides_[axis].mid();
  left.sides_[axis] = Interval(sides_[axis].lo(), m);
  right.sides_[axis] = Interval(m, sides_[axis].hi());
  return {std::move(left), std::move(right)};
}

BoxRegion BoxRegion::inflated(double factor) const {
  BoxRegion out = *this;
  for (auto& s : out.sides_) {
    const double m = s.mid(), r = 0.5 * s.width() * factor;
    s = Interval(m - r, m + r);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Midpoint-radius affine maps.
//
// For y_i = sum_j H_ij x_j + b_i with x_j in [m_j - r_j, m_j + r_j] the exact
// image lies in [c_i - R_i, c_i + R_i], c_i = sum H_ij m_j + b_i and
// R_i = sum |H_ij| r_j. Recursive summation of k terms in round-to-nearest
// has error at most gamma_k * sum |terms|, gamma_k = k u / (1 - k u); the
// constants below dominate gamma_k by a factor of two and also cover the
// rounding of the radius sums themselves.

namespace {

struct MidRad {
  double mid;
  double rad;
};

bool to_mid_rad(std::span<const Interval> x, std::vector<MidRad>& out) {
  out.resize(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) {
    if (!x[j].is_finite()) return false;
    const double m = x[j].mid();
    out[j] = {m, round_up(std::max(x[j].hi() - m, m - x[j].lo()))};
  }
  return true;
}

Interval finish(double c, double abs_sum, double rad_sum, std::size_t terms) {
  const double g = 2.0 * static_cast<double>(terms + 2) * kUnit;
  const double eta = 4.0 * static_cast<double>(terms + 1) *
                     std::numeric_limits<double>::denorm_min();
  double rho = (rad_sum + g * abs_sum) * (1.0 + g) + eta;
  rho = rho * (1.0 + 8.0 * kUnit);
  if (!std::isfinite(c) || !std::isfinite(rho)) return Interval::entire();
  return {round_down(c - rho), round_up(c + rho)};
}

}  // namespace

void affine_enclosure(std::span<const double> weights, std::span<const double> bias,
                      std::size_t rows, std::size_t cols, std::span<const Interval> x,
                      std::span<Interval> y) {
  assert(weights.size() == rows * cols && x.size() == cols && y.size() == rows);
  thread_local std::vector<MidRad> mr;
  if (!to_mid_rad(x, mr)) {
    for (auto& v : y) v = Interval::entire();
    return;
  }
  for (std::size_t i = 0; i < rows; ++i) {
    const double* h = weights.data() + i * cols;
    double c = bias.empty() ? 0.0 : bias[i];
    double s = std::fabs(c);
    double r = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      const double p = h[j] * mr[j].mid;
      c += p;
      s += std::fabs(p);
      r += std::fabs(h[j]) * mr[j].rad;
    }
    y[i] = finish(c, s, r, cols + 1);
  }
}

void transposed_enclosure(std::span<const double> weights, std::size_t rows,
                          std::size_t cols, std::span<const Interval> x,
                          std::span<Interval> y) {
  assert(weights.size() == rows * cols && x.size() == rows && y.size() == cols);
  thread_local std::vector<MidRad> mr;
  if (!to_mid_rad(x, mr)) {
    for (auto& v : y) v = Interval::entire();
    return;
  }
  thread_local std::vector<double> c, s, r;
  c.assign(cols, 0.0);
  s.assign(cols, 0.0);
  r.assign(cols, 0.0);
  for (std::size_t i = 0; i < rows; ++i) {
    const double* h = weights.data() + i * cols;
    const double m = mr[i].mid, rad = mr[i].rad;
    for (std::size_t j = 0; j < cols; ++j) {
      const double p = h[j] * m;
      c[j] += p;
      s[j] += std::fabs(p);
      r[j] += std::fabs(h[j]) * rad;
    }
  }
  for (std::size_t j = 0; j < cols; ++j) y[j] = finish(c[j], s[j], r[j], rows);
}

}  // namespace nlyap
