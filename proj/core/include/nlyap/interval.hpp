#pragma once

// Closed floating-point intervals with outward rounding.
//
// Every primitive widens an inexact endpoint by at least one ulp
// (nextafter), so the returned interval encloses the exact real image of
// the operand intervals. + - * detect exact results with error-free
// transformations and leave those endpoints alone. Infinite endpoints are allowed for intermediate
// results (e.g. division by an interval containing zero); NaN is never
// stored: any operation that would produce one returns the entire line.

#include <cmath>
#include <cstddef>
#include <iosfwd>
#include <limits>
#include <span>
#include <vector>

namespace nlyap {

class Interval {
 public:
  constexpr Interval() = default;
  constexpr Interval(double v) : lo_(v), hi_(v) {}  // NOLINT: implicit point
  Interval(double lo, double hi);

  static Interval entire();

  double lo() const { return lo_; }
  double hi() const { return hi_; }
  double width() const { return hi_ - lo_; }
  double mid() const;
  double mag() const { return std::fmax(std::fabs(lo_), std::fabs(hi_)); }
  bool contains(double x) const { return lo_ <= x && x <= hi_; }
  bool contains_zero() const { return lo_ <= 0.0 && 0.0 <= hi_; }
  bool is_point() const { return lo_ == hi_; }
  bool is_finite() const { return std::isfinite(lo_) && std::isfinite(hi_); }

  friend Interval operator+(const Interval& a, const Interval& b);
  friend Interval operator-(const Interval& a, const Interval& b);
  friend Interval operator*(const Interval& a, const Interval& b);
  friend Interval operator/(const Interval& a, const Interval& b);
  friend Interval operator-(const Interval& a) { return {-a.hi_, -a.lo_}; }

  Interval& operator+=(const Interval& b) { return *this = *this + b; }
  Interval& operator-=(const Interval& b) { return *this = *this - b; }
  Interval& operator*=(const Interval& b) { return *this = *this * b; }

  friend bool operator==(const Interval&, const Interval&) = default;

 private:
  double lo_ = 0.0;
  double hi_ = 0.0;
};

std::ostream& operator<<(std::ostream& os, const Interval& x);

double round_down(double x);
double round_up(double x);

Interval sqr(const Interval& x);
Interval powi(const Interval& x, int k);
Interval sqrt(const Interval& x);
Interval exp(const Interval& x);
Interval tanh(const Interval& x);
Interval sin(const Interval& x);
Interval cos(const Interval& x);
Interval abs(const Interval& x);
Interval min(const Interval& a, const Interval& b);
Interval max(const Interval& a, const Interval& b);
Interval hull(const Interval& a, const Interval& b);
/// Intersection of two enclosures of the same quantity; throws NumericError
/// when they are disjoint, which means one of them was unsound.
Interval intersect(const Interval& a, const Interval& b);

/// Axis-aligned box: one interval per coordinate. Widths are finite.
class BoxRegion {
 public:
  BoxRegion() = default;
  explicit BoxRegion(std::vector<Interval> sides);
  BoxRegion(std::span<const double> lo, std::span<const double> hi);
  static BoxRegion cube(std::size_t dim, double half_width);

  std::size_t dim() const { return sides_.size(); }
  const Interval& operator[](std::size_t i) const { return sides_[i]; }
  Interval& operator[](std::size_t i) { return sides_[i]; }
  std::span<const Interval> sides() const { return sides_; }

  std::vector<double> center() const;
  std::size_t widest_dimension() const;
  double max_width() const;
  double volume() const;
  bool contains(std::span<const double> x) const;
  bool contains_strictly(std::span<const double> x) const;
  /// Splits along `axis` at the midpoint.
  std::pair<BoxRegion, BoxRegion> bisect(std::size_t axis) const;
  /// Each side scaled about its own center by `factor`.
  BoxRegion inflated(double factor) const;

  friend bool operator==(const BoxRegion&, const BoxRegion&) = default;

 private:
  std::vector<Interval> sides_;
};

/// Enclosure of y = H x + b for a point matrix H (row-major, rows x cols),
/// point bias b and interval vector x, in midpoint-radius form with a
/// rigorous bound on the floating-point error of the midpoint evaluation.
void affine_enclosure(std::span<const double> weights, std::span<const double> bias,
                      std::size_t rows, std::size_t cols, std::span<const Interval> x,
                      std::span<Interval> y);

/// Same as above without bias, for the transposed matrix: y = Hᵀ x.
void transposed_enclosure(std::span<const double> weights, std::size_t rows,
                          std::size_t cols, std::span<const Interval> x,
                          std::span<Interval> y);

}  // namespace nlyap
