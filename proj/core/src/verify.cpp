#include "nlyap/verify.hpp"

#include <cmath>
#include <deque>
#include <sstream>

#include "nlyap/errors.hpp"
#include "nlyap/hash.hpp"
#include "nlyap/lyapunov_matrix.hpp"

namespace nlyap {

namespace {

class ExprTerm final : public Term {
 public:
  ExprTerm(const Expr& e, std::size_t dim, std::string label)
      : dim_(dim), label_(label.empty() ? e.to_string() : std::move(label)) {
    if (e.arity() > dim) throw ArgumentError("expr_term: expression uses more variables than dim");
    program_ = ExprProgram(std::span<const Expr>(&e, 1), dim);
  }
  std::size_t dim() const override { return dim_; }
  double eval(std::span<const double> x) const override {
    double out;
    program_.eval(x, std::span<double>(&out, 1));
    return out;
  }
  Interval enclose(std::span<const Interval> box) const override {
    Interval out;
    program_.enclose(box, std::span<Interval>(&out, 1));
    return out;
  }
  std::string describe() const override { return label_; }

 private:
  std::size_t dim_;
  std::string label_;
  ExprProgram program_;
};

class ValueTerm final : public Term {
 public:
  explicit ValueTerm(std::shared_ptr<const CandidateFunction> w) : w_(std::move(w)) {}
  std::size_t dim() const override { return w_->dim(); }
  double eval(std::span<const double> x) const override { return w_->value(x); }
  Interval enclose(std::span<const Interval> box) const override { return w_->enclose_value(box); }
  std::string describe() const override { return "W"; }

 private:
  std::shared_ptr<const CandidateFunction> w_;
};

class LieTerm final : public Term {
 public:
  LieTerm(std::shared_ptr<const CandidateFunction> w, const VectorFieldSpec& sys)
      : w_(std::move(w)), sys_(sys) {
    if (w_->dim() != sys_.dim()) throw ArgumentError("lie_derivative_term: dimension mismatch");
  }
  std::size_t dim() const override { return sys_.dim(); }
  double eval(std::span<const double> x) const override {
    thread_local std::vector<double> g, f;
    g.resize(dim());
    f.resize(dim());
    w_->value_and_gradient(x, g);
    sys_.eval_f(x, f);
    double s = 0.0;
    for (std::size_t i = 0; i < dim(); ++i) s += g[i] * f[i];
    return s;
  }
  Interval enclose(std::span<const Interval> box) const override {
    thread_local std::vector<Interval> g, f;
    g.resize(dim());
    f.resize(dim());
    w_->enclose_value_and_gradient(box, g);
    sys_.enclose_f(box, f);
    Interval s(0.0);
    for (std::size_t i = 0; i < dim(); ++i) s += g[i] * f[i];
    return s;
  }
  std::string describe() const override { return "dW/dt"; }

 private:
  std::shared_ptr<const CandidateFunction> w_;
  VectorFieldSpec sys_;
};

const char* relation_symbol(Relation r) {
  switch (r) {
    case Relation::Le: return "<=";
    case Relation::Lt: return "<";
    case Relation::Ge: return ">=";
    case Relation::Gt: return ">";
  }
  return "?";
}

Truth decide(const Predicate& p, const Interval& I) {
  const double b = p.bound;
  switch (p.rel) {
    case Relation::Le:
      if (I.hi() <= b) return Truth::True;
      if (I.lo() > b) return Truth::False;
      break;
    case Relation::Lt:
      if (I.hi() < b) return Truth::True;
      if (I.lo() >= b) return Truth::False;
      break;
    case Relation::Ge:
      if (I.lo() >= b) return Truth::True;
      if (I.hi() < b) return Truth::False;
      break;
    case Relation::Gt:
      if (I.lo() > b) return Truth::True;
      if (I.hi() <= b) return Truth::False;
      break;
  }
  return Truth::Unknown;
}

double violation_of(const Predicate& p, const Interval& I) {
  return (p.rel == Relation::Le || p.rel == Relation::Lt) ? I.lo() - p.bound : p.bound - I.hi();
}

std::string box_string(std::span<const Interval> box) {
  std::ostringstream os;
  os.precision(6);
  for (std::size_t i = 0; i < box.size(); ++i) os << (i ? " x " : "") << box[i];
  return os.str();
}

std::string implication_string(const std::vector<Predicate>& hyps, const Predicate& concl) {
  std::string s;
  for (std::size_t i = 0; i < hyps.size(); ++i) s += (i ? " and " : "") + hyps[i].describe();
  if (hyps.empty()) return concl.describe();
  return s + " => " + concl.describe();
}

std::string config_hash(const Certificate& cert, const CheckOptions& opts) {
  Fnv1a h;
  h.add(cert.claim);
  for (const auto& [k, v] : cert.constants) {
    h.add(k);
    h.add(v);
  }
  h.add(opts.delta_split);
  h.add(static_cast<std::uint64_t>(opts.max_boxes));
  return h.hex();
}

}  // namespace

TermPtr expr_term(const Expr& e, std::size_t dim, std::string label) {
  return std::make_shared<ExprTerm>(e, dim, std::move(label));
}

TermPtr candidate_value_term(std::shared_ptr<const CandidateFunction> w) {
  return std::make_shared<ValueTerm>(std::move(w));
}

TermPtr lie_derivative_term(std::shared_ptr<const CandidateFunction> w, const VectorFieldSpec& sys) {
  return std::make_shared<LieTerm>(std::move(w), sys);
}

Truth Predicate::test(std::span<const Interval> box) const { return decide(*this, term->enclose(box)); }

double Predicate::violation(std::span<const double> x) const {
  thread_local std::vector<Interval> pt;
  pt.assign(x.begin(), x.end());
  return violation_of(*this, term->enclose(pt));
}

std::string Predicate::describe() const {
  std::ostringstream os;
  os.precision(17);
  os << term->describe() << ' ' << relation_symbol(rel) << ' ' << bound;
  return os.str();
}

Predicate le(TermPtr t, double bound) { return {std::move(t), Relation::Le, bound}; }
Predicate lt(TermPtr t, double bound) { return {std::move(t), Relation::Lt, bound}; }
Predicate ge(TermPtr t, double bound) { return {std::move(t), Relation::Ge, bound}; }
Predicate gt(TermPtr t, double bound) { return {std::move(t), Relation::Gt, bound}; }

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::Certified: return "certified";
    case Verdict::Refuted: return "refuted";
    case Verdict::Unknown: return "unknown";
  }
  return "unknown";
}

nlohmann::json Certificate::to_json() const {
  nlohmann::json j{{"claim", claim},
                   {"result", to_string(result)},
                   {"boxes_processed", boxes_processed},
                   {"max_depth", max_depth},
                   {"constants", constants},
                   {"diagnostics", diagnostics},
                   {"coverage_digest", coverage_digest},
                   {"config_hash", config_hash},
                   {"witness_nondeterministic", false}};
  j["witness"] = witness ? nlohmann::json(*witness) : nlohmann::json(nullptr);
  if (!parts.empty()) {
    j["parts"] = nlohmann::json::array();
    for (const auto& p : parts) j["parts"].push_back(p.to_json());
  }
  return j;
}

Certificate conjoin(std::string claim, std::vector<Certificate> parts) {
  Certificate out;
  out.claim = std::move(claim);
  out.result = Verdict::Certified;
  Fnv1a digest, hash;
  for (const auto& p : parts) {
    out.boxes_processed += p.boxes_processed;
    out.max_depth = std::max(out.max_depth, p.max_depth);
    for (const auto& [k, v] : p.constants) out.constants.emplace(k, v);
    digest.add(p.coverage_digest);
    hash.add(p.config_hash);
    if (out.result == Verdict::Certified && !p.certified()) {
      out.result = p.result;
      out.witness = p.witness;
      out.diagnostics = "failing sub-claim: " + p.claim + (p.diagnostics.empty() ? "" : "; " + p.diagnostics);
    }
  }
  out.coverage_digest = digest.hex();
  out.config_hash = hash.hex();
  out.parts = std::move(parts);
  return out;
}

Certificate check_implication(const std::vector<Predicate>& hypotheses, const Predicate& conclusion,
                              const BoxRegion& X, const CheckOptions& opts) {
  return check_implication(hypotheses, conclusion, X, X, opts);
}

Certificate check_implication(const std::vector<Predicate>& hypotheses, const Predicate& conclusion,
                              const BoxRegion& X, const BoxRegion& scale, const CheckOptions& opts) {
  if (!(opts.delta_split > 0.0)) throw ArgumentError("check_implication: delta_split must be positive");
  if (opts.max_boxes == 0) throw ArgumentError("check_implication: max_boxes must be positive");
  const std::size_t n = X.dim();
  if (scale.dim() != n) throw ArgumentError("check_implication: scale box dimension mismatch");
  if (!conclusion.term) throw ArgumentError("check_implication: missing conclusion");
  for (const auto& h : hypotheses)
    if (!h.term || h.term->dim() != n) throw ArgumentError("check_implication: hypothesis dimension mismatch");
  if (conclusion.term->dim() != n) throw ArgumentError("check_implication: conclusion dimension mismatch");

  Certificate cert;
  cert.claim = implication_string(hypotheses, conclusion) + " on " + box_string(X.sides());
  cert.constants = {{"delta_split", opts.delta_split}};
  cert.config_hash = config_hash(cert, opts);

  // Predicates over the same term share one enclosure per box.
  std::vector<const Term*> terms;
  auto term_slot = [&](const Term* t) {
    for (std::size_t i = 0; i < terms.size(); ++i)
      if (terms[i] == t) return i;
    terms.push_back(t);
    return terms.size() - 1;
  };
  std::vector<std::size_t> hyp_slot;
  for (const auto& h : hypotheses) hyp_slot.push_back(term_slot(h.term.get()));
  const std::size_t concl_slot = term_slot(conclusion.term.get());
  std::vector<Interval> enc(terms.size());
  std::vector<char> have(terms.size());

  std::vector<double> inv_scale(n);
  for (std::size_t i = 0; i < n; ++i) inv_scale[i] = 1.0 / scale[i].width();

  Fnv1a digest;
  auto record_pruned = [&](std::span<const Interval> box, char reason) {
    digest.add(std::string_view(&reason, 1));
    for (const auto& s : box) {
      digest.add(s.lo());
      digest.add(s.hi());
    }
  };

  struct Node {
    std::vector<Interval> box;
    std::size_t depth;
  };
  std::deque<Node> queue;
  queue.push_back({std::vector<Interval>(X.sides().begin(), X.sides().end()), 0});
  std::vector<double> centre(n);
  std::vector<Interval> centre_box(n);

  auto finish = [&](Verdict v, std::string diag) {
    cert.result = v;
    cert.diagnostics = std::move(diag);
    cert.coverage_digest = digest.hex();
    return cert;
  };

  while (!queue.empty()) {
    Node node = std::move(queue.front());
    queue.pop_front();
    if (cert.boxes_processed >= opts.max_boxes)
      return finish(Verdict::Unknown, "box budget of " + std::to_string(opts.max_boxes) +
                                          " exhausted with " + std::to_string(queue.size() + 1) +
                                          " boxes open");
    ++cert.boxes_processed;
    cert.max_depth = std::max(cert.max_depth, node.depth);
    const auto& box = node.box;

    std::fill(have.begin(), have.end(), 0);
    auto enclosure = [&](std::size_t slot) -> const Interval& {
      if (!have[slot]) {
        enc[slot] = terms[slot]->enclose(box);
        have[slot] = 1;
      }
      return enc[slot];
    };

    bool pruned = false;
    for (std::size_t k = 0; k < hypotheses.size() && !pruned; ++k)
      pruned = decide(hypotheses[k], enclosure(hyp_slot[k])) == Truth::False;
    if (pruned) {
      record_pruned(box, 'h');
      continue;
    }
    if (decide(conclusion, enclosure(concl_slot)) == Truth::True) {
      record_pruned(box, 'c');
      continue;
    }

    // Centre refutation: hypotheses enclosed as true at the point and the
    // conclusion enclosed as violated by more than the margin.
    for (std::size_t i = 0; i < n; ++i) {
      centre[i] = box[i].mid();
      centre_box[i] = Interval(centre[i]);
    }
    bool hyps_hold = true;
    for (std::size_t k = 0; k < hypotheses.size() && hyps_hold; ++k)
      hyps_hold = decide(hypotheses[k], terms[hyp_slot[k]]->enclose(centre_box)) == Truth::True;
    if (hyps_hold &&
        violation_of(conclusion, terms[concl_slot]->enclose(centre_box)) > kRefutationMargin) {
      cert.witness = centre;
      std::ostringstream os;
      os.precision(17);
      os << conclusion.term->describe() << " = " << conclusion.term->eval(centre) << " at witness";
      return finish(Verdict::Refuted, os.str());
    }

    std::size_t axis = 0;
    double widest = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double w = box[i].width() * inv_scale[i];
      if (w > widest) {
        widest = w;
        axis = i;
      }
    }
    if (widest < opts.delta_split)
      return finish(Verdict::Unknown, "undecided box below delta_split: " + box_string(box));

    const double lo = box[axis].lo(), hi = box[axis].hi();
    const double mid = lo + 0.5 * (hi - lo);
    Node left{box, node.depth + 1};
    Node right{box, node.depth + 1};
    left.box[axis] = Interval(lo, mid);
    right.box[axis] = Interval(mid, hi);
    queue.push_back(std::move(left));
    queue.push_back(std::move(right));
  }
  return finish(Verdict::Certified, "");
}

// ---------------------------------------------------------------------------

Expr quadratic_form(const Eigen::MatrixXd& P) {
  const auto n = static_cast<std::size_t>(P.rows());
  Expr v(0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    v = v + P(ii, ii) * sqr(Expr::var(i));
    for (std::size_t j = i + 1; j < n; ++j) {
      const double pij = P(ii, static_cast<Eigen::Index>(j));
      if (pij != 0.0) v = v + (2.0 * pij) * (Expr::var(i) * Expr::var(j));
    }
  }
  return v;
}

double inscribed_level(const Eigen::MatrixXd& P, const BoxRegion& X) {
  const Eigen::MatrixXd Pinv = P.inverse();
  double c = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < X.dim(); ++i) {
    const double d = std::min(-X[i].lo(), X[i].hi());
    const auto ii = static_cast<Eigen::Index>(i);
    c = std::min(c, d * d / Pinv(ii, ii));
  }
  return c * (1.0 - 1e-9);
}

BoxRegion ellipsoid_bounding_box(const Eigen::MatrixXd& P, double c, const BoxRegion& X) {
  const Eigen::MatrixXd Pinv = P.inverse();
  std::vector<Interval> sides;
  for (std::size_t i = 0; i < X.dim(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const double h = std::sqrt(c * Pinv(ii, ii)) * (1.0 + 1e-9);
    sides.emplace_back(std::max(X[i].lo(), -h), std::min(X[i].hi(), h));
  }
  return BoxRegion(std::move(sides));
}

nlohmann::json LocalResult::to_json() const {
  std::vector<std::vector<double>> rows(static_cast<std::size_t>(P.rows()));
  for (Eigen::Index i = 0; i < P.rows(); ++i)
    for (Eigen::Index j = 0; j < P.cols(); ++j) rows[static_cast<std::size_t>(i)].push_back(P(i, j));
  return {{"c", c},
          {"P", rows},
          {"r", r},
          {"c_max", c_max},
          {"global_on_X", global_on_X},
          {"certificate", certificate.to_json()}};
}

LocalResult verify_local(const VectorFieldSpec& sys, const Eigen::MatrixXd& Q, double eps,
                         const CheckOptions& opts, int iterations) {
  const std::size_t n = sys.dim();
  if (Q.rows() != static_cast<Eigen::Index>(n) || Q.cols() != static_cast<Eigen::Index>(n))
    throw ArgumentError("verify_local: Q has wrong shape");
  const double lambda = min_eigenvalue_symmetric(Q);
  if (!(eps >= 0.0) || !(eps < lambda)) throw ArgumentError("verify_local: need 0 <= eps < lambda_min(Q)");
  if (iterations < 1) throw ArgumentError("verify_local: iterations must be positive");

  const Linearization lin = linearization(sys);
  LocalResult res;
  res.P = solve_lyapunov_matrix(lin.A, Q);
  res.r = lambda - eps;
  res.c_max = inscribed_level(res.P, sys.domain());

  // |P Dg|_F^2 as an expression; entries of Dg that vanish identically are skipped.
  Expr frob(0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      Expr m(0.0);
      for (std::size_t k = 0; k < n; ++k) {
        const Expr& dg = lin.residual_jacobian[k][j];
        const double pik = res.P(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
        if (!dg.is_zero() && pik != 0.0) m = m + pik * dg;
      }
      if (!m.is_zero()) frob = frob + sqr(m);
    }
  }
  const double bound = round_down(round_down(res.r * res.r) * 0.25);
  const Predicate conclusion = le(expr_term(frob, n, "|P Dg|_F^2"), bound);
  const TermPtr vp = expr_term(quadratic_form(res.P), n, "x'Px");

  auto annotate = [&](Certificate cert, double c) {
    cert.constants["r"] = res.r;
    cert.constants["eps"] = eps;
    cert.constants["c"] = c;
    return cert;
  };

  Certificate global = annotate(check_implication({}, conclusion, sys.domain(), opts), res.c_max);
  if (global.certified()) {
    res.global_on_X = true;
    res.c = res.c_max;
    res.certificate = std::move(global);
    return res;
  }

  auto attempt = [&](double c) {
    const BoxRegion region = ellipsoid_bounding_box(res.P, c, sys.domain());
    return annotate(check_implication({le(vp, c)}, conclusion, region, sys.domain(), opts), c);
  };

  Certificate last = attempt(res.c_max);
  if (last.certified()) {
    res.c = res.c_max;
    res.certificate = std::move(last);
    return res;
  }
  double lo = 0.0, hi = res.c_max;
  std::optional<Certificate> best;
  for (int it = 0; it < iterations; ++it) {
    const double mid = 0.5 * (lo + hi);
    Certificate cert = attempt(mid);
    if (cert.certified()) {
      lo = mid;
      best = std::move(cert);
    } else {
      hi = mid;
      last = std::move(cert);
    }
  }
  if (!best) throw VerificationFailure("local verification failed: no level c > 0 certified", last);
  res.c = lo;
  res.certificate = std::move(*best);
  return res;
}

// ---------------------------------------------------------------------------

Certificate verify_band_condition(const VectorFieldSpec& sys,
                                  std::shared_ptr<const CandidateFunction> w, double c1, double c2,
                                  double eps, const BoxRegion& X, const CheckOptions& opts) {
  const TermPtr W = candidate_value_term(w);
  const TermPtr dW = lie_derivative_term(w, sys);
  Certificate cert = check_implication({ge(W, c1), le(W, c2)}, le(dW, -eps), X, opts);
  cert.constants["c1"] = c1;
  cert.constants["c2"] = c2;
  cert.constants["eps"] = eps;
  return cert;
}

Certificate verify_inner_condition(std::shared_ptr<const CandidateFunction> w,
                                   const Eigen::MatrixXd& P, double c, double c1,
                                   const BoxRegion& X, const CheckOptions& opts) {
  const TermPtr W = candidate_value_term(std::move(w));
  const TermPtr vp = expr_term(quadratic_form(P), X.dim(), "x'Px");
  Certificate cert = check_implication({le(W, c1)}, le(vp, c), X, opts);
  cert.constants["c"] = c;
  cert.constants["c1"] = c1;
  return cert;
}

Certificate verify_shell_condition(std::shared_ptr<const CandidateFunction> w, double c2,
                                   const BoxRegion& X, const CheckOptions& opts) {
  const TermPtr W = candidate_value_term(std::move(w));
  std::vector<Certificate> slabs;
  for (std::size_t i = 0; i < X.dim(); ++i) {
    const double m = opts.delta_split * X[i].width();
    for (int side = 0; side < 2; ++side) {
      std::vector<Interval> s(X.sides().begin(), X.sides().end());
      s[i] = side == 0 ? Interval(X[i].lo(), X[i].lo() + m) : Interval(X[i].hi() - m, X[i].hi());
      slabs.push_back(check_implication({}, gt(W, c2), BoxRegion(std::move(s)), X, opts));
      if (!slabs.back().certified()) break;
    }
    if (!slabs.back().certified()) break;
  }
  std::ostringstream claim;
  claim.precision(17);
  claim << "W > " << c2 << " on the boundary shell of " << box_string(X.sides());
  Certificate cert = conjoin(claim.str(), std::move(slabs));
  cert.constants["c2"] = c2;
  return cert;
}

Certificate verify_roa_conditions(const VectorFieldSpec& sys,
                                  std::shared_ptr<const CandidateFunction> w,
                                  const Eigen::MatrixXd& P, double c, double c1, double c2,
                                  double eps, const BoxRegion& X, const CheckOptions& opts) {
  if (!(0.0 < c1 && c1 < c2)) throw ArgumentError("verify_roa_conditions: need 0 < c1 < c2");
  if (!(eps > 0.0)) throw ArgumentError("verify_roa_conditions: eps must be positive");
  if (!(c > 0.0)) throw ArgumentError("verify_roa_conditions: c must be positive");
  if (!w || w->dim() != sys.dim() || X.dim() != sys.dim())
    throw ArgumentError("verify_roa_conditions: dimension mismatch");
  std::vector<Certificate> parts;
  parts.push_back(verify_band_condition(sys, w, c1, c2, eps, X, opts));
  if (parts.back().certified()) parts.push_back(verify_inner_condition(w, P, c, c1, X, opts));
  if (parts.back().certified()) parts.push_back(verify_shell_condition(w, c2, X, opts));
  std::ostringstream claim;
  claim.precision(17);
  claim << "{W <= " << c2 << "} is a region of attraction";
  Certificate cert = conjoin(claim.str(), std::move(parts));
  cert.constants["c"] = c;
  cert.constants["c1"] = c1;
  cert.constants["c2"] = c2;
  cert.constants["eps"] = eps;
  cert.constants["delta_split"] = opts.delta_split;
  return cert;
}

}  // namespace nlyap
