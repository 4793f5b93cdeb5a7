#pragma once

// Run configuration: one JSON document with the sections system, transform,
// net, train, integrator, verify and paths. Every key is optional; absent
// keys take the defaults below and are listed in the run metadata.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "nlyap/dynamics.hpp"
#include "nlyap/net.hpp"
#include "nlyap/odeint.hpp"
#include "nlyap/roa.hpp"
#include "nlyap/train.hpp"
#include "nlyap/zubov.hpp"

namespace nlyap {

struct SystemSection {
  std::string name = "scalar_cubic";
  std::map<std::string, double> params;
  /// Overrides the builtin domain box: one [lo, hi] pair per coordinate.
  std::vector<std::pair<double, double>> domain;
};

struct NetSection {
  std::vector<std::size_t> hidden{30, 30};
  OutputHead head = OutputHead::Affine;
  std::uint64_t seed = 0;
};

struct VerifySection {
  double q_scale = 1.0;  // Q = q_scale * I unless q_matrix is given
  std::vector<std::vector<double>> q_matrix;
  double eps_local = 1e-4;
  double eps_roa = 1e-4;
  double delta_split = 1e-3;
  std::size_t budget = 2'000'000;
  int c1_iterations = 20;
  int c2_iterations = 20;
  double level_max = 1.0;
  std::size_t doa_samples = 100000;
  std::uint64_t doa_seed = 7;
  /// Fixed levels for verify-roa; when absent the levels are searched.
  std::optional<double> c1;
  std::optional<double> c2;
};

struct PathsSection {
  std::string checkpoint = "checkpoint.json";
  std::string report = "report.json";
  std::string dataset = "dataset.csv";
  std::string local_certificate = "local_certificate.json";
  std::string roa = "roa.json";
  std::string grid = "grid.csv";
};

struct RunConfig {
  SystemSection system;
  ZubovTransform transform;
  NetSection net;
  TrainConfig train;
  IntegratorConfig integrator;
  VerifySection verify;
  PathsSection paths;

  /// Throws ArgumentError on unknown keys or ill-typed values. Keys that
  /// were absent are appended to `defaults_used` as dotted paths.
  static RunConfig from_json(const nlohmann::json& j, std::vector<std::string>* defaults_used = nullptr);
  nlohmann::json to_json() const;

  VectorFieldSpec make_system() const;
  Eigen::MatrixXd q_matrix(std::size_t n) const;
  std::vector<std::size_t> layer_dims(std::size_t n) const;
  CheckOptions check_options() const;
  RoaOptions roa_options() const;
};

RunConfig load_run_config(const std::string& path, std::vector<std::string>* defaults_used = nullptr);
void save_run_config(const std::string& path, const RunConfig& cfg);

/// "nlyap <version> (<git revision>)".
std::string version_string();

/// Metadata block carried by every output: version, config hash, seeds,
/// the defaulted keys, and the system with its domain box.
nlohmann::json run_metadata(const RunConfig& cfg, const std::vector<std::string>& defaults_used,
                            const std::string& command);

}  // namespace nlyap
