// nlyap: train and certify neural Lyapunov functions from a JSON run config.
//
// Exit codes: 0 success, 2 bad arguments / config / checkpoint / I/O,
// 3 training divergence, 4 local verification failure, 5 ROA search failure.

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "nlyap/config.hpp"
#include "nlyap/errors.hpp"
#include "nlyap/lyapunov_matrix.hpp"
#include "nlyap/net.hpp"
#include "nlyap/roa.hpp"
#include "nlyap/rng.hpp"
#include "nlyap/train.hpp"
#include "nlyap/verify.hpp"
#include "nlyap/zubov.hpp"

namespace {

using namespace nlyap;
using nlohmann::json;

constexpr int kOk = 0;
constexpr int kBadInput = 2;
constexpr int kDiverged = 3;
constexpr int kLocalFailed = 4;
constexpr int kRoaFailed = 5;

struct Common {
  std::string config_path;
  std::string checkpoint;
  std::optional<double> delta;
  std::optional<std::size_t> budget;
  std::optional<double> eps;
};

struct Loaded {
  RunConfig cfg;
  std::vector<std::string> defaults;
  VectorFieldSpec sys;
};

Loaded load(const Common& c) {
  std::vector<std::string> defaults;
  RunConfig cfg = load_run_config(c.config_path, &defaults);
  if (c.delta) cfg.verify.delta_split = *c.delta;
  if (c.budget) cfg.verify.budget = *c.budget;
  if (c.eps) {
    cfg.verify.eps_local = *c.eps;
    cfg.verify.eps_roa = *c.eps;
  }
  if (!c.checkpoint.empty()) cfg.paths.checkpoint = c.checkpoint;
  if (!(cfg.verify.delta_split > 0.0) || cfg.verify.budget == 0 || !(cfg.verify.eps_roa > 0.0))
    throw ArgumentError("--delta, --budget and --eps must be positive");
  VectorFieldSpec sys = cfg.make_system();
  return {std::move(cfg), std::move(defaults), std::move(sys)};
}

void write_json(const std::string& path, const json& j) {
  std::ofstream os(path);
  if (!os) throw ArgumentError("cannot write '" + path + "'");
  os << j.dump(2) << '\n';
  if (!os) throw ArgumentError("write failed for '" + path + "'");
}

std::shared_ptr<const CandidateFunction> load_candidate(const Loaded& L) {
  const Checkpoint ckpt = load_checkpoint(L.cfg.paths.checkpoint);
  if (ckpt.input_dim() != L.sys.dim())
    throw ArgumentError("checkpoint input dimension " + std::to_string(ckpt.input_dim()) +
                        " does not match system dimension " + std::to_string(L.sys.dim()));
  return std::shared_ptr<const CandidateFunction>(ckpt.candidate());
}

std::vector<double> parse_list(const std::string& s, const char* what) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(cell, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != cell.size()) throw ArgumentError(std::string("bad number in ") + what + ": '" + cell + "'");
    out.push_back(v);
  }
  return out;
}

int cmd_gen_data(const Common& c) {
  const Loaded L = load(c);
  const auto& cfg = L.cfg;
  const Dataset ds = generate_dataset(L.sys, cfg.transform, cfg.integrator, cfg.train.n_data,
                                      stream_seed(cfg.train.seed, 3));
  json meta = run_metadata(cfg, L.defaults, "gen-data");
  meta["integration_failures"] = ds.integration_failures;
  meta["tail_closed"] = ds.tail_closed;
  std::ofstream os(cfg.paths.dataset);
  if (!os) throw ArgumentError("cannot write '" + cfg.paths.dataset + "'");
  os << "# " << meta.dump() << '\n';
  write_dataset_csv(os, ds.samples);
  std::cout << "wrote " << ds.samples.size() << " samples (" << ds.count(LabelStatus::Interior)
            << " interior, " << ds.count(LabelStatus::NonConvergent) << " non-convergent, "
            << ds.count(LabelStatus::Excluded) << " excluded) to " << cfg.paths.dataset << '\n';
  return kOk;
}

int cmd_train(const Common& c) {
  const Loaded L = load(c);
  const auto& cfg = L.cfg;
  json meta = run_metadata(cfg, L.defaults, "train");
  const PointSets sets = sample_points(L.sys, cfg.train, cfg.transform, cfg.integrator);
  const NetParams init = NetParams::xavier(cfg.layer_dims(L.sys.dim()), cfg.net.seed, cfg.net.head);
  const json counts{{"collocation", sets.collocation.size()},
                    {"validation", sets.validation.size()},
                    {"boundary", sets.boundary.size()},
                    {"data", sets.data.size()},
                    {"integration_failures", sets.integration_failures},
                    {"tail_closed", sets.tail_closed}};
  try {
    auto [net, report] = train(L.sys, cfg.train, cfg.transform, init, sets);
    Checkpoint ckpt;
    ckpt.net = std::move(net);
    ckpt.metadata = meta;
    ckpt.metadata["best_epoch"] = report.best_epoch;
    save_checkpoint(cfg.paths.checkpoint, ckpt);
    write_json(cfg.paths.report, {{"metadata", meta}, {"points", counts}, {"report", report.to_json()}});
    const double final_loss = report.epochs.empty() ? report.initial_validation : report.epochs.back().loss;
    std::cout << "trained " << report.epochs.size() << " epochs in " << report.wall_seconds
              << " s; final loss " << final_loss << ", eps_hat " << report.eps_hat << "; wrote "
              << cfg.paths.checkpoint << '\n';
    return kOk;
  } catch (const TrainingDivergence& e) {
    write_json(cfg.paths.report, {{"metadata", meta},
                                  {"points", counts},
                                  {"error", e.what()},
                                  {"report", e.report().to_json()}});
    std::cerr << "error: " << e.what() << '\n';
    return kDiverged;
  }
}

// Runs the local check, writing its certificate. Empty on failure.
std::optional<LocalResult> run_local(const Loaded& L, const json& meta) {
  const auto& cfg = L.cfg;
  try {
    LocalResult local = verify_local(L.sys, cfg.q_matrix(L.sys.dim()), cfg.verify.eps_local,
                                     cfg.check_options());
    write_json(cfg.paths.local_certificate, {{"metadata", meta}, {"local", local.to_json()}});
    std::cout << "local: c = " << local.c << (local.global_on_X ? " (bound holds on all of X)" : "")
              << ", " << local.certificate.boxes_processed << " boxes\n";
    return local;
  } catch (const VerificationFailure& e) {
    write_json(cfg.paths.local_certificate,
               {{"metadata", meta}, {"error", e.what()}, {"certificate", e.certificate().to_json()}});
    std::cerr << "error: " << e.what() << '\n';
    return std::nullopt;
  }
}

int cmd_verify_local(const Common& c) {
  const Loaded L = load(c);
  return run_local(L, run_metadata(L.cfg, L.defaults, "verify-local")) ? kOk : kLocalFailed;
}

int run_roa(const Loaded& L, const LocalResult& local, const json& meta) {
  const auto& cfg = L.cfg;
  const auto w = load_candidate(L);
  std::optional<DoaSamples> doa;
  if (cfg.verify.doa_samples > 0)
    doa = estimate_doa(L.sys, cfg.integrator, cfg.verify.doa_samples, cfg.verify.doa_seed);
  json out{{"metadata", meta}, {"local", {{"c", local.c}, {"global_on_X", local.global_on_X}}}};
  out["candidate"] = w->describe();
  if (cfg.verify.c1 || cfg.verify.c2) {
    if (!cfg.verify.c1 || !cfg.verify.c2) throw ArgumentError("--c1 and --c2 must be given together");
    const Certificate cert = verify_roa_conditions(L.sys, w, local.P, local.c, *cfg.verify.c1,
                                                   *cfg.verify.c2, cfg.verify.eps_roa,
                                                   L.sys.domain(), cfg.check_options());
    out["certificate"] = cert.to_json();
    out["c1"] = *cfg.verify.c1;
    out["c2"] = *cfg.verify.c2;
    if (cert.certified() && doa) {
      const VolumeStats v = volume_ratio(*w, *cfg.verify.c2, *doa);
      out["volume_ratio"] = v.ratio;
      out["doa_sample_count"] = v.inside;
      out["outside_doa_below_c2"] = v.outside_below;
    }
    write_json(cfg.paths.roa, out);
    std::cout << "roa: " << to_string(cert.result) << " for c1 = " << *cfg.verify.c1
              << ", c2 = " << *cfg.verify.c2 << '\n';
    if (!cert.certified()) std::cerr << "error: " << cert.diagnostics << '\n';
    return cert.certified() ? kOk : kRoaFailed;
  }
  try {
    const RoaResult res = search_max_level(L.sys, w, local.P, local.c, L.sys.domain(),
                                           cfg.roa_options(), doa ? &*doa : nullptr);
    out["roa"] = res.to_json();
    write_json(cfg.paths.roa, out);
    std::cout << "roa: certified c1 = " << res.c1 << ", c2 = " << res.c2;
    if (res.volume_computed)
      std::cout << ", volume ratio " << res.volume_ratio << " (" << res.outside_below
                << " out-of-DoA samples below c2)";
    std::cout << '\n';
    return kOk;
  } catch (const RoaSearchFailure& e) {
    out["error"] = e.what();
    out["certificate"] = e.certificate().to_json();
    write_json(cfg.paths.roa, out);
    std::cerr << "error: " << e.what() << '\n';
    return kRoaFailed;
  }
}

// verify-roa and verify: the local check, then the fixed levels or the search.
int cmd_verify(const Common& c, std::optional<double> c1, std::optional<double> c2,
               const std::string& name) {
  Loaded L = load(c);
  if (c1) L.cfg.verify.c1 = c1;
  if (c2) L.cfg.verify.c2 = c2;
  const json meta = run_metadata(L.cfg, L.defaults, name);
  load_candidate(L);  // fail early on a bad checkpoint
  const auto local = run_local(L, meta);
  if (!local) return kLocalFailed;
  return run_roa(L, *local, meta);
}

int cmd_export_grid(const Common& c, std::size_t resolution, const std::string& axes,
                    const std::string& fixed, const std::string& out_path) {
  const Loaded L = load(c);
  const auto w = load_candidate(L);
  GridSlice slice;
  slice.resolution = resolution;
  const auto ax = parse_list(axes, "--axes");
  if (L.sys.dim() >= 2) {
    if (ax.size() != 2) throw ArgumentError("--axes needs two coordinate indices");
    for (double a : ax)
      if (a < 1 || a != std::floor(a)) throw ArgumentError("--axes entries are 1-based indices");
    slice.axis_x = static_cast<std::size_t>(ax[0]) - 1;
    slice.axis_y = static_cast<std::size_t>(ax[1]) - 1;
  }
  if (!fixed.empty()) slice.fixed = parse_list(fixed, "--fix");
  const std::string path = out_path.empty() ? L.cfg.paths.grid : out_path;
  std::ostringstream body;
  write_level_grid(body, L.sys, *w, slice, L.cfg.integrator);
  std::ofstream os(path);
  if (!os) throw ArgumentError("cannot write '" + path + "'");
  json meta = run_metadata(L.cfg, L.defaults, "export-grid");
  meta["candidate"] = w->describe();
  os << "# " << meta.dump() << '\n' << body.str();
  std::cout << "wrote grid to " << path << '\n';
  return kOk;
}

int cmd_simulate(const Common& c, const std::string& x0s, const std::string& out_path) {
  const Loaded L = load(c);
  const auto x0 = parse_list(x0s, "--x0");
  if (x0.size() != L.sys.dim()) throw ArgumentError("--x0 needs " + std::to_string(L.sys.dim()) + " values");
  const ZubovTransform& tr = L.cfg.transform;
  const ScalarField omega = [&tr](std::span<const double> x) { return tr.omega(x); };
  json traj = json::array();
  const auto observer = [&](double t, std::span<const double> x) {
    json row{t};
    for (double v : x) row.push_back(v);
    traj.push_back(row);
  };
  json out{{"metadata", run_metadata(L.cfg, L.defaults, "simulate")}, {"x0", x0}};
  try {
    const auto tail = value_tail_matrix(L.sys, tr);
    const auto o = integrate_with_value(L.sys, omega, x0, L.cfg.integrator, tail, observer);
    out["status"] = to_string(o.status);
    out["final_time"] = o.final_time;
    out["final_state"] = o.final_state;
    out["value_integral"] = o.value_integral;
    if (o.status == TrajectoryStatus::Converged) out["w"] = tr.beta(o.value_integral);
    out["steps"] = o.steps;
  } catch (const IntegrationError& e) {
    out["status"] = "integration_error";
    out["error"] = e.what();
  }
  out["trajectory"] = traj;
  if (out_path.empty()) {
    std::cout << out.dump(2) << '\n';
  } else {
    write_json(out_path, out);
    std::cout << "simulation " << out["status"].get<std::string>() << "; wrote " << out_path << '\n';
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Train and certify neural Lyapunov functions"};
  app.set_version_flag("--version", version_string());
  app.require_subcommand(1);

  Common common;
  auto add_config = [&](CLI::App* sub) {
    sub->add_option("config", common.config_path, "run config (JSON)")->required();
  };
  auto add_checkpoint = [&](CLI::App* sub) {
    sub->add_option("--checkpoint", common.checkpoint, "checkpoint path (overrides paths.checkpoint)");
  };
  auto add_verify_flags = [&](CLI::App* sub) {
    sub->add_option("--delta", common.delta, "relative box width below which a box is undecided");
    sub->add_option("--budget", common.budget, "maximum boxes per implication check");
    sub->add_option("--eps", common.eps, "decrease margin for the local and band checks");
  };

  auto* gen = app.add_subcommand("gen-data", "label simulated samples and write them as CSV");
  add_config(gen);
  auto* tr = app.add_subcommand("train", "sample points, train the network, write checkpoint and report");
  add_config(tr);
  auto* vl = app.add_subcommand("verify-local", "certify a quadratic local region of attraction");
  add_config(vl);
  add_verify_flags(vl);
  std::optional<double> c1, c2;
  auto* vr = app.add_subcommand("verify-roa", "certify a sublevel set of the trained network");
  add_config(vr);
  add_checkpoint(vr);
  add_verify_flags(vr);
  vr->add_option("--c1", c1, "inner level (with --c2: check these levels instead of searching)");
  vr->add_option("--c2", c2, "outer level");
  auto* vf = app.add_subcommand("verify", "verify-local followed by the level search");
  add_config(vf);
  add_checkpoint(vf);
  add_verify_flags(vf);
  std::size_t resolution = 101;
  std::string axes = "1,2", fixed, grid_out;
  auto* eg = app.add_subcommand("export-grid", "write W, dW/dt and DoA labels on a 2-d slice");
  add_config(eg);
  add_checkpoint(eg);
  eg->add_option("--resolution", resolution, "grid points per axis");
  eg->add_option("--axes", axes, "the two 1-based coordinates spanning the slice");
  eg->add_option("--fix", fixed, "comma-separated full point giving the fixed coordinates");
  eg->add_option("--out", grid_out, "output CSV (overrides paths.grid)");
  std::string x0, sim_out;
  auto* sim = app.add_subcommand("simulate", "integrate one trajectory with its value integral");
  add_config(sim);
  sim->add_option("--x0", x0, "comma-separated initial state")->required();
  sim->add_option("--out", sim_out, "output JSON (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kBadInput;
  }

  try {
    if (*gen) return cmd_gen_data(common);
    if (*tr) return cmd_train(common);
    if (*vl) return cmd_verify_local(common);
    if (*vr) return cmd_verify(common, c1, c2, "verify-roa");
    if (*vf) return cmd_verify(common, std::nullopt, std::nullopt, "verify");
    if (*eg) return cmd_export_grid(common, resolution, axes, fixed, grid_out);
    if (*sim) return cmd_simulate(common, x0, sim_out);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kBadInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kBadInput;
  }
  return kBadInput;
}
