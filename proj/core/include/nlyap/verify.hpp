#pragma once

// Interval branch-and-bound for implications "A_1 and ... and A_k => B"
// quantified over a box, and the two verification pipelines built on it:
// the quadratic local-stability check and the sublevel-set conditions for a
// learned W.

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "nlyap/candidate.hpp"
#include "nlyap/dynamics.hpp"
#include "nlyap/expr.hpp"
#include "nlyap/interval.hpp"

namespace nlyap {

/// Scalar function of x with a sound interval enclosure.
class Term {
 public:
  virtual ~Term() = default;
  virtual std::size_t dim() const = 0;
  virtual double eval(std::span<const double> x) const = 0;
  virtual Interval enclose(std::span<const Interval> box) const = 0;
  virtual std::string describe() const = 0;
};

using TermPtr = std::shared_ptr<const Term>;

TermPtr expr_term(const Expr& e, std::size_t dim, std::string label = "");
/// W(x).
TermPtr candidate_value_term(std::shared_ptr<const CandidateFunction> w);
/// grad W(x) . f(x), enclosed from the interval gradient and interval f.
TermPtr lie_derivative_term(std::shared_ptr<const CandidateFunction> w, const VectorFieldSpec& sys);

enum class Relation { Le, Lt, Ge, Gt };

enum class Truth { False, True, Unknown };

/// term REL bound.
struct Predicate {
  TermPtr term;
  Relation rel = Relation::Le;
  double bound = 0.0;

  /// True/False when the enclosure decides the relation on the whole box.
  Truth test(std::span<const Interval> box) const;
  /// Amount by which the enclosure at a point exceeds the bound on the wrong
  /// side; positive means rigorously violated.
  double violation(std::span<const double> x) const;
  std::string describe() const;
};

Predicate le(TermPtr t, double bound);
Predicate lt(TermPtr t, double bound);
Predicate ge(TermPtr t, double bound);
Predicate gt(TermPtr t, double bound);

enum class Verdict { Certified, Refuted, Unknown };

std::string to_string(Verdict v);

struct Certificate {
  std::string claim;
  Verdict result = Verdict::Unknown;
  std::optional<std::vector<double>> witness;
  std::size_t boxes_processed = 0;
  std::size_t max_depth = 0;
  std::map<std::string, double> constants;
  std::string diagnostics;
  /// FNV-1a over the pruned boxes (bit patterns and pruning reason) in
  /// processing order.
  std::string coverage_digest;
  /// FNV-1a over the claim text, the constants and the checker options.
  std::string config_hash;
  std::vector<Certificate> parts;

  bool certified() const { return result == Verdict::Certified; }
  nlohmann::json to_json() const;
};

/// All parts certified => Certified; otherwise the first failing part's
/// verdict, named in the diagnostics.
Certificate conjoin(std::string claim, std::vector<Certificate> parts);

struct CheckOptions {
  double delta_split = 1e-3;  // relative to the domain widths
  std::size_t max_boxes = 2'000'000;
};

/// Threshold by which a refuting point must violate the conclusion.
inline constexpr double kRefutationMargin = 1e-9;

/// Breadth-first branch-and-bound. A box is discarded when some hypothesis
/// is provably false on it or the conclusion is provably true; otherwise its
/// centre is tried as a counterexample and it is bisected along its widest
/// relative dimension. A box narrower than delta_split in every relative
/// dimension that is still undecided makes the result Unknown, as does
/// exceeding max_boxes.
Certificate check_implication(const std::vector<Predicate>& hypotheses, const Predicate& conclusion,
                              const BoxRegion& X, const CheckOptions& opts = {});

/// Same, with widths measured relative to `scale` instead of X.
Certificate check_implication(const std::vector<Predicate>& hypotheses, const Predicate& conclusion,
                              const BoxRegion& X, const BoxRegion& scale, const CheckOptions& opts);

class VerificationFailure : public std::runtime_error {
 public:
  VerificationFailure(const std::string& what, Certificate cert)
      : std::runtime_error(what), certificate_(std::move(cert)) {}
  const Certificate& certificate() const { return certificate_; }

 private:
  Certificate certificate_;
};

/// xᵀ P x.
Expr quadratic_form(const Eigen::MatrixXd& P);

/// Largest c such that {xᵀ P x <= c} lies inside X.
double inscribed_level(const Eigen::MatrixXd& P, const BoxRegion& X);

/// Bounding box of {xᵀ P x <= c}, slightly inflated and clipped to X.
BoxRegion ellipsoid_bounding_box(const Eigen::MatrixXd& P, double c, const BoxRegion& X);

struct LocalResult {
  double c = 0.0;
  Eigen::MatrixXd P;
  double r = 0.0;
  double c_max = 0.0;  // inscribed level, the bisection's upper end
  bool global_on_X = false;
  Certificate certificate;

  nlohmann::json to_json() const;
};

/// Quadratic local stability. With x' = A x + g(x), solves
/// P A + Aᵀ P = -Q, sets r = lambda_min(Q) - eps and finds by bisection the
/// largest c (at most the inscribed level) for which
///   xᵀ P x <= c  =>  4 |P Dg(x)|_F^2 <= r^2
/// is certified on the ellipsoid's bounding box. When the conclusion holds
/// on all of X the result is flagged global_on_X and c is the inscribed
/// level. Throws VerificationFailure when no c > 0 certifies.
LocalResult verify_local(const VectorFieldSpec& sys, const Eigen::MatrixXd& Q, double eps,
                         const CheckOptions& opts = {}, int iterations = 30);

/// The three sublevel-set conditions for W on X:
///   (i)   c1 <= W <= c2  =>  grad W . f <= -eps
///   (ii)  W <= c1        =>  xᵀ P x <= c
///   (iii) W > c2 on the shell of X of relative thickness delta_split.
Certificate verify_roa_conditions(const VectorFieldSpec& sys,
                                  std::shared_ptr<const CandidateFunction> w,
                                  const Eigen::MatrixXd& P, double c, double c1, double c2,
                                  double eps, const BoxRegion& X, const CheckOptions& opts = {});

Certificate verify_band_condition(const VectorFieldSpec& sys,
                                  std::shared_ptr<const CandidateFunction> w, double c1, double c2,
                                  double eps, const BoxRegion& X, const CheckOptions& opts);
Certificate verify_inner_condition(std::shared_ptr<const CandidateFunction> w,
                                   const Eigen::MatrixXd& P, double c, double c1,
                                   const BoxRegion& X, const CheckOptions& opts);
Certificate verify_shell_condition(std::shared_ptr<const CandidateFunction> w, double c2,
                                   const BoxRegion& X, const CheckOptions& opts);

}  // namespace nlyap
