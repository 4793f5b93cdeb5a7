#include "nlyap/config.hpp"

#include <fstream>
#include <set>

#include "nlyap/errors.hpp"
#include "nlyap/hash.hpp"

#ifndef NLYAP_VERSION
#define NLYAP_VERSION "0.0.0"
#endif
#ifndef NLYAP_GIT_REV
#define NLYAP_GIT_REV "unknown"
#endif

namespace nlyap {

namespace {

using nlohmann::json;

// Reads one JSON object, recording defaults and rejecting unknown keys.
class Section {
 public:
  Section(const json& j, std::string path, std::vector<std::string>* defaults)
      : j_(j), path_(std::move(path)), defaults_(defaults) {
    if (!j_.is_object()) throw ArgumentError("config: '" + path_ + "' must be an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) {
      if (defaults_) defaults_->push_back(path_ + "." + key);
      return;
    }
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ArgumentError("config: bad value for '" + path_ + "." + key + "': " + e.what());
    }
  }

  template <class T>
  void get_optional(const char* key, std::optional<T>& out) {
    seen_.insert(key);
    if (!j_.contains(key) || j_.at(key).is_null()) {
      if (defaults_) defaults_->push_back(path_ + "." + key);
      return;
    }
    T v{};
    get(key, v);
    out = v;
  }

  /// Subsection; an absent key reads as an empty object.
  std::optional<Section> sub(const char* key) {
    seen_.insert(key);
    if (!j_.contains(key)) {
      if (defaults_) defaults_->push_back(path_ + "." + key);
      return std::nullopt;
    }
    return Section(j_.at(key), path_ + "." + key, defaults_);
  }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw ArgumentError("config: unknown key '" + path_ + "." + k + "'");
  }

 private:
  const json& j_;
  std::string path_;
  std::vector<std::string>* defaults_;
  std::set<std::string> seen_;
};


}  // namespace

RunConfig RunConfig::from_json(const json& j, std::vector<std::string>* defaults_used) {
  RunConfig cfg;
  Section root(j, "config", defaults_used);

  if (auto s = root.sub("system")) {
    s->get("name", cfg.system.name);
    s->get("params", cfg.system.params);
    s->get("domain", cfg.system.domain);
    s->finish();
  }
  if (!builtin_from_name(cfg.system.name))
    throw ArgumentError("config: unknown system '" + cfg.system.name + "'");

  if (auto s = root.sub("transform")) {
    std::string kind = to_string(cfg.transform.kind);
    s->get("kind", kind);
    cfg.transform.kind = transform_kind_from_string(kind);
    s->get("alpha", cfg.transform.alpha);
    s->get("omega_scale", cfg.transform.omega_scale);
    s->finish();
  }
  cfg.transform.validate();

  if (auto s = root.sub("net")) {
    s->get("hidden", cfg.net.hidden);
    std::string head = to_string(cfg.net.head);
    s->get("output_head", head);
    cfg.net.head = output_head_from_string(head);
    s->get("seed", cfg.net.seed);
    s->finish();
  }
  for (auto h : cfg.net.hidden)
    if (h == 0) throw ArgumentError("config: hidden layer widths must be positive");

  if (auto s = root.sub("train")) {
    auto& t = cfg.train;
    s->get("n_collocation", t.n_collocation);
    s->get("n_boundary", t.n_boundary);
    s->get("n_data", t.n_data);
    s->get("lambda_b", t.lambda_b);
    s->get("lambda_d", t.lambda_d);
    s->get("epochs", t.epochs);
    s->get("batch_size", t.batch_size);
    s->get("seed", t.seed);
    std::string pde = to_string(t.pde);
    s->get("pde", pde);
    t.pde = pde_kind_from_string(pde);
    s->get("validation_fraction", t.validation_fraction);
    s->get("eval_grid_points", t.eval_grid_points);
    s->get("anchor_origin", t.anchor_origin);
    if (auto a = s->sub("adam")) {
      a->get("lr", t.adam.lr);
      a->get("beta1", t.adam.beta1);
      a->get("beta2", t.adam.beta2);
      a->get("eps", t.adam.eps);
      a->finish();
    }
    s->finish();
  }
  cfg.train.validate();

  if (auto s = root.sub("integrator")) {
    auto& c = cfg.integrator;
    s->get("rel_tol", c.rel_tol);
    s->get("abs_tol", c.abs_tol);
    s->get("max_time", c.max_time);
    s->get("converge_radius", c.converge_radius);
    s->get("escape_factor", c.escape_factor);
    s->get("max_steps", c.max_steps);
    s->finish();
  }

  if (auto s = root.sub("verify")) {
    auto& v = cfg.verify;
    s->get("q_scale", v.q_scale);
    s->get("q_matrix", v.q_matrix);
    s->get("eps_local", v.eps_local);
    s->get("eps_roa", v.eps_roa);
    s->get("delta_split", v.delta_split);
    s->get("budget", v.budget);
    s->get("c1_iterations", v.c1_iterations);
    s->get("c2_iterations", v.c2_iterations);
    s->get("level_max", v.level_max);
    s->get("doa_samples", v.doa_samples);
    s->get("doa_seed", v.doa_seed);
    s->get_optional("c1", v.c1);
    s->get_optional("c2", v.c2);
    s->finish();
  }
  if (!(cfg.verify.delta_split > 0.0) || cfg.verify.budget == 0 || !(cfg.verify.eps_roa > 0.0) ||
      !(cfg.verify.q_scale > 0.0))
    throw ArgumentError("config: verify.delta_split, budget, eps_roa and q_scale must be positive");

  if (auto s = root.sub("paths")) {
    auto& p = cfg.paths;
    s->get("checkpoint", p.checkpoint);
    s->get("report", p.report);
    s->get("dataset", p.dataset);
    s->get("local_certificate", p.local_certificate);
    s->get("roa", p.roa);
    s->get("grid", p.grid);
    s->finish();
  }
  root.finish();

  // Building the system validates the name, parameters and domain together.
  const VectorFieldSpec sys = cfg.make_system();
  cfg.integrator.validate(sys.domain());
  return cfg;
}

json RunConfig::to_json() const {
  json j;
  j["system"] = {{"name", system.name}, {"params", system.params}, {"domain", system.domain}};
  j["transform"] = {{"kind", to_string(transform.kind)},
                    {"alpha", transform.alpha},
                    {"omega_scale", transform.omega_scale}};
  j["net"] = {{"hidden", net.hidden}, {"output_head", to_string(net.head)}, {"seed", net.seed}};
  j["train"] = {{"n_collocation", train.n_collocation},
                {"n_boundary", train.n_boundary},
                {"n_data", train.n_data},
                {"lambda_b", train.lambda_b},
                {"lambda_d", train.lambda_d},
                {"epochs", train.epochs},
                {"batch_size", train.batch_size},
                {"seed", train.seed},
                {"pde", to_string(train.pde)},
                {"validation_fraction", train.validation_fraction},
                {"eval_grid_points", train.eval_grid_points},
                {"anchor_origin", train.anchor_origin},
                {"adam",
                 {{"lr", train.adam.lr},
                  {"beta1", train.adam.beta1},
                  {"beta2", train.adam.beta2},
                  {"eps", train.adam.eps}}}};
  j["integrator"] = {{"rel_tol", integrator.rel_tol},
                     {"abs_tol", integrator.abs_tol},
                     {"max_time", integrator.max_time},
                     {"converge_radius", integrator.converge_radius},
                     {"escape_factor", integrator.escape_factor},
                     {"max_steps", integrator.max_steps}};
  j["verify"] = {{"q_scale", verify.q_scale},
                 {"q_matrix", verify.q_matrix},
                 {"eps_local", verify.eps_local},
                 {"eps_roa", verify.eps_roa},
                 {"delta_split", verify.delta_split},
                 {"budget", verify.budget},
                 {"c1_iterations", verify.c1_iterations},
                 {"c2_iterations", verify.c2_iterations},
                 {"level_max", verify.level_max},
                 {"doa_samples", verify.doa_samples},
                 {"doa_seed", verify.doa_seed},
                 {"c1", verify.c1 ? json(*verify.c1) : json(nullptr)},
                 {"c2", verify.c2 ? json(*verify.c2) : json(nullptr)}};
  j["paths"] = {{"checkpoint", paths.checkpoint},
                {"report", paths.report},
                {"dataset", paths.dataset},
                {"local_certificate", paths.local_certificate},
                {"roa", paths.roa},
                {"grid", paths.grid}};
  return j;
}

VectorFieldSpec RunConfig::make_system() const {
  VectorFieldSpec sys = make_builtin(system.name, system.params);
  if (system.domain.empty()) return sys;
  if (system.domain.size() != sys.dim())
    throw ArgumentError("config: system.domain needs one [lo, hi] pair per coordinate");
  std::vector<Interval> sides;
  for (const auto& [lo, hi] : system.domain) sides.emplace_back(lo, hi);
  return sys.with_domain(BoxRegion(std::move(sides)));
}

Eigen::MatrixXd RunConfig::q_matrix(std::size_t n) const {
  const auto N = static_cast<Eigen::Index>(n);
  if (verify.q_matrix.empty()) return verify.q_scale * Eigen::MatrixXd::Identity(N, N);
  if (verify.q_matrix.size() != n) throw ArgumentError("config: verify.q_matrix has wrong shape");
  Eigen::MatrixXd Q(N, N);
  for (std::size_t i = 0; i < n; ++i) {
    if (verify.q_matrix[i].size() != n) throw ArgumentError("config: verify.q_matrix has wrong shape");
    for (std::size_t k = 0; k < n; ++k)
      Q(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = verify.q_matrix[i][k];
  }
  return Q;
}

std::vector<std::size_t> RunConfig::layer_dims(std::size_t n) const {
  std::vector<std::size_t> dims{n};
  dims.insert(dims.end(), net.hidden.begin(), net.hidden.end());
  dims.push_back(1);
  return dims;
}

CheckOptions RunConfig::check_options() const { return {verify.delta_split, verify.budget}; }

RoaOptions RunConfig::roa_options() const {
  RoaOptions o;
  o.check = check_options();
  o.eps = verify.eps_roa;
  o.c1_iterations = verify.c1_iterations;
  o.c2_iterations = verify.c2_iterations;
  o.level_max = verify.level_max;
  return o;
}

RunConfig load_run_config(const std::string& path, std::vector<std::string>* defaults_used) {
  std::ifstream is(path);
  if (!is) throw ArgumentError("cannot open config '" + path + "'");
  json j;
  try {
    j = json::parse(is);
  } catch (const json::exception& e) {
    throw ArgumentError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return RunConfig::from_json(j, defaults_used);
}

void save_run_config(const std::string& path, const RunConfig& cfg) {
  std::ofstream os(path);
  if (!os) throw ArgumentError("cannot write config '" + path + "'");
  os << cfg.to_json().dump(2) << '\n';
}

std::string version_string() { return std::string("nlyap ") + NLYAP_VERSION + " (" + NLYAP_GIT_REV + ")"; }

json run_metadata(const RunConfig& cfg, const std::vector<std::string>& defaults_used,
                  const std::string& command) {
  const VectorFieldSpec sys = cfg.make_system();
  std::vector<std::pair<double, double>> domain;
  for (const auto& s : sys.domain().sides()) domain.emplace_back(s.lo(), s.hi());
  return {{"version", version_string()},
          {"command", command},
          {"config_hash", fnv1a_hex(cfg.to_json().dump())},
          {"seeds", {{"net", cfg.net.seed}, {"train", cfg.train.seed}, {"doa", cfg.verify.doa_seed}}},
          {"defaults_used", defaults_used},
          {"system", {{"name", sys.name()}, {"params", sys.params()}, {"domain", domain}}}};
}

}  // namespace nlyap
