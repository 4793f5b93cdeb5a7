#include "nlyap/dynamics.hpp"

#include <numbers>

#include "nlyap/errors.hpp"

namespace nlyap {

namespace {

std::vector<Expr> flatten(const std::vector<std::vector<Expr>>& m) {
  std::vector<Expr> out;
  for (const auto& row : m) out.insert(out.end(), row.begin(), row.end());
  return out;
}

Expr x(std::size_t i) { return Expr::var(i); }

double take(std::map<std::string, double>& params, const std::string& key, double fallback) {
  auto it = params.find(key);
  if (it == params.end()) return fallback;
  const double v = it->second;
  params.erase(it);
  return v;
}

VectorFieldSpec scalar(std::string name, Expr f, Expr df) {
  return VectorFieldSpec(std::move(name), {std::move(f)}, {{std::move(df)}},
                         BoxRegion({Interval(-1.5, 1.5)}));
}

VectorFieldSpec van_der_pol(double mu) {
  std::vector<Expr> f{-x(1), x(0) - mu * (1.0 - sqr(x(0))) * x(1)};
  std::vector<std::vector<Expr>> J{{Expr(0.0), Expr(-1.0)},
                                   {1.0 + 2.0 * mu * x(0) * x(1), -mu * (1.0 - sqr(x(0)))}};
  // Stiffer oscillators have a taller limit cycle.
  BoxRegion domain = mu >= 2.0 ? BoxRegion({Interval(-3.0, 3.0), Interval(-6.0, 6.0)})
                               : BoxRegion({Interval(-2.5, 2.5), Interval(-3.5, 3.5)});
  return VectorFieldSpec("van_der_pol", std::move(f), std::move(J), std::move(domain),
                         {{"mu", mu}});
}

VectorFieldSpec inverted_pendulum(double k1, double k2) {
  std::vector<Expr> f{x(1), -sin(x(0)) - x(1) - (k1 * x(0) + k2 * x(1))};
  std::vector<std::vector<Expr>> J{{Expr(0.0), Expr(1.0)},
                                   {-cos(x(0)) - k1, Expr(-1.0 - k2)}};
  const double pi = std::numbers::pi;
  return VectorFieldSpec("inverted_pendulum", std::move(f), std::move(J),
                         BoxRegion({Interval(-pi, pi), Interval(-pi, pi)}),
                         {{"k1", k1}, {"k2", k2}});
}

VectorFieldSpec two_machine_power(double delta) {
  // Deviation coordinates: the stable equilibrium (delta, 0) sits at the origin.
  std::vector<Expr> f{x(1), -0.5 * x(1) - (sin(x(0) + delta) - sin(Expr(delta)))};
  std::vector<std::vector<Expr>> J{{Expr(0.0), Expr(1.0)},
                                   {-cos(x(0) + delta), Expr(-0.5)}};
  const double w = 2.0 * std::numbers::pi / 3.0 + 1.0;
  return VectorFieldSpec("two_machine_power", std::move(f), std::move(J),
                         BoxRegion({Interval(-w, w), Interval(-3.0, 3.0)}),
                         {{"delta", delta}});
}

VectorFieldSpec ten_dimensional() {
  std::vector<Expr> f{
      -x(0) + 0.5 * x(1) - 0.1 * sqr(x(8)),
      -0.5 * x(0) - x(1),
      -x(2) + 0.5 * x(3) - 0.1 * sqr(x(0)),
      -0.5 * x(2) - x(3),
      -x(4) + 0.5 * x(5) + 0.1 * sqr(x(6)),
      -0.5 * x(4) - x(5),
      -x(6) + 0.5 * x(7),
      -0.5 * x(6) - x(7),
      -x(8) + 0.5 * x(9),
      -0.5 * x(8) - x(9) + 0.1 * sqr(x(1)),
  };
  std::vector<std::vector<Expr>> J(10, std::vector<Expr>(10, Expr(0.0)));
  for (std::size_t k = 0; k < 10; k += 2) {
    J[k][k] = Expr(-1.0);
    J[k][k + 1] = Expr(0.5);
    J[k + 1][k] = Expr(-0.5);
    J[k + 1][k + 1] = Expr(-1.0);
  }
  J[0][8] = -0.2 * x(8);
  J[2][0] = -0.2 * x(0);
  J[4][6] = 0.2 * x(6);
  J[9][1] = 0.2 * x(1);
  return VectorFieldSpec("ten_dimensional", std::move(f), std::move(J), BoxRegion::cube(10, 2.5));
}

}  // namespace

VectorFieldSpec::VectorFieldSpec(std::string name, std::vector<Expr> rhs,
                                 std::vector<std::vector<Expr>> jacobian, BoxRegion domain,
                                 std::map<std::string, double> params,
                                 std::optional<double> lipschitz_hint)
    : name_(std::move(name)),
      rhs_(std::move(rhs)),
      jacobian_(std::move(jacobian)),
      domain_(std::move(domain)),
      params_(std::move(params)),
      lipschitz_hint_(lipschitz_hint) {
  const std::size_t n = rhs_.size();
  if (n == 0) throw ArgumentError("VectorFieldSpec: zero dimension");
  if (jacobian_.size() != n) throw ArgumentError("VectorFieldSpec: jacobian row count");
  for (const auto& row : jacobian_)
    if (row.size() != n) throw ArgumentError("VectorFieldSpec: jacobian column count");
  if (domain_.dim() != n) throw ArgumentError("VectorFieldSpec: domain dimension");
  const std::vector<double> origin(n, 0.0);
  if (!domain_.contains_strictly(origin))
    throw ArgumentError("VectorFieldSpec: domain must contain the origin in its interior");
  if (lipschitz_hint_ && !(*lipschitz_hint_ > 0.0))
    throw ArgumentError("VectorFieldSpec: lipschitz hint must be positive");
  for (const auto& e : rhs_)
    if (e.arity() > n) throw ArgumentError("VectorFieldSpec: rhs references x beyond n");
  f_program_ = ExprProgram(rhs_, n);
  const auto flat = flatten(jacobian_);
  jacobian_program_ = ExprProgram(flat, n);
}

VectorFieldSpec VectorFieldSpec::with_domain(BoxRegion domain) const {
  return VectorFieldSpec(name_, rhs_, jacobian_, std::move(domain), params_, lipschitz_hint_);
}

void VectorFieldSpec::check_dim(std::size_t n) const {
  if (n != dim())
    throw ArgumentError(name_ + ": expected state of dimension " + std::to_string(dim()) +
                        ", got " + std::to_string(n));
}

std::vector<double> VectorFieldSpec::eval_f(std::span<const double> x) const {
  std::vector<double> out(dim());
  eval_f(x, out);
  return out;
}

void VectorFieldSpec::eval_f(std::span<const double> x, std::span<double> out) const {
  check_dim(x.size());
  check_dim(out.size());
  f_program_.eval(x, out);
}

Eigen::MatrixXd VectorFieldSpec::eval_jacobian(std::span<const double> x) const {
  check_dim(x.size());
  const std::size_t n = dim();
  std::vector<double> flat(n * n);
  jacobian_program_.eval(x, flat);
  Eigen::MatrixXd J(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) J(i, j) = flat[i * n + j];
  return J;
}

void VectorFieldSpec::enclose_f(std::span<const Interval> box, std::span<Interval> out) const {
  check_dim(box.size());
  check_dim(out.size());
  f_program_.enclose(box, out);
}

void VectorFieldSpec::enclose_jacobian(std::span<const Interval> box, std::span<Interval> out) const {
  check_dim(box.size());
  if (out.size() != dim() * dim()) throw ArgumentError("enclose_jacobian: output size mismatch");
  jacobian_program_.enclose(box, out);
}

Eigen::VectorXd Linearization::residual(const VectorFieldSpec& sys,
                                        std::span<const double> x) const {
  const auto f = sys.eval_f(x);
  Eigen::VectorXd g = Eigen::Map<const Eigen::VectorXd>(f.data(), f.size());
  g -= A * Eigen::Map<const Eigen::VectorXd>(x.data(), x.size());
  return g;
}

Linearization linearization(const VectorFieldSpec& sys) {
  const std::size_t n = sys.dim();
  const std::vector<double> origin(n, 0.0);
  Linearization lin{sys.eval_jacobian(origin), {}};
  lin.residual_jacobian.assign(n, std::vector<Expr>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const Expr& Jij = sys.jacobian_exprs()[i][j];
      const double a = lin.A(i, j);
      if (Jij.is_constant() && Jij.constant_value() == a)
        lin.residual_jacobian[i][j] = Expr(0.0);
      else
        lin.residual_jacobian[i][j] = Jij - Expr(a);
    }
  }
  return lin;
}

std::optional<BuiltinSystem> builtin_from_name(const std::string& name) {
  static const std::map<std::string, BuiltinSystem> table{
      {"scalar_cubic", BuiltinSystem::ScalarCubic},
      {"scalar_linear", BuiltinSystem::ScalarLinear},
      {"scalar_neg_cubic", BuiltinSystem::ScalarNegCubic},
      {"van_der_pol", BuiltinSystem::VanDerPolReversed},
      {"inverted_pendulum", BuiltinSystem::InvertedPendulum},
      {"two_machine_power", BuiltinSystem::TwoMachinePower},
      {"ten_dimensional", BuiltinSystem::TenDimensional},
  };
  auto it = table.find(name);
  if (it == table.end()) return std::nullopt;
  return it->second;
}

std::string builtin_name(BuiltinSystem kind) {
  switch (kind) {
    case BuiltinSystem::ScalarCubic: return "scalar_cubic";
    case BuiltinSystem::ScalarLinear: return "scalar_linear";
    case BuiltinSystem::ScalarNegCubic: return "scalar_neg_cubic";
    case BuiltinSystem::VanDerPolReversed: return "van_der_pol";
    case BuiltinSystem::InvertedPendulum: return "inverted_pendulum";
    case BuiltinSystem::TwoMachinePower: return "two_machine_power";
    case BuiltinSystem::TenDimensional: return "ten_dimensional";
  }
  return "unknown";
}

std::vector<std::string> builtin_names() {
  return {"scalar_cubic",      "scalar_linear",     "scalar_neg_cubic", "van_der_pol",
          "inverted_pendulum", "two_machine_power", "ten_dimensional"};
}

VectorFieldSpec make_builtin(BuiltinSystem kind, const std::map<std::string, double>& params) {
  auto p = params;
  auto result = [&]() -> VectorFieldSpec {
    switch (kind) {
      case BuiltinSystem::ScalarCubic:
        return scalar("scalar_cubic", -x(0) + powi(x(0), 3), -1.0 + 3.0 * sqr(x(0)));
      case BuiltinSystem::ScalarLinear:
        return scalar("scalar_linear", -x(0), Expr(-1.0));
      case BuiltinSystem::ScalarNegCubic:
        return scalar("scalar_neg_cubic", -powi(x(0), 3), -3.0 * sqr(x(0)));
      case BuiltinSystem::VanDerPolReversed: {
        const double mu = take(p, "mu", 1.0);
        if (!(mu > 0.0)) throw ArgumentError("van_der_pol: mu must be positive");
        return van_der_pol(mu);
      }
      case BuiltinSystem::InvertedPendulum: {
        const double k1 = take(p, "k1", 2.4142);
        const double k2 = take(p, "k2", 2.3163);
        return inverted_pendulum(k1, k2);
      }
      case BuiltinSystem::TwoMachinePower:
        return two_machine_power(take(p, "delta", std::numbers::pi / 3.0));
      case BuiltinSystem::TenDimensional:
        return ten_dimensional();
    }
    throw ArgumentError("make_builtin: unknown system");
  }();
  if (!p.empty())
    throw ArgumentError(builtin_name(kind) + ": unknown parameter '" + p.begin()->first + "'");
  return result;
}

VectorFieldSpec make_builtin(const std::string& name, const std::map<std::string, double>& params) {
  auto kind = builtin_from_name(name);
  if (!kind) throw ArgumentError("unknown system '" + name + "'");
  return make_builtin(*kind, params);
}

}  // namespace nlyap
