#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "moilab/funcmodel.hpp"
#include "moilab/spectral.hpp"

namespace moilab {

struct Tolerances {
  double derivative = 1e-5;
  double slope_deviation = 0.3;
  double remainder = 1e-8;
  double perturbation_first = 1e-9;
  double perturbation_higher = 1e-8;
  double telescoping = 1e-8;
  double continuity_slope_deviation = 0.1;
  double moi_cross_form = 1e-9;
  double multilinearity = 1e-10;
  double discretized_final = 1e-8;
  double discretized_ratio = 0.75;
  double counting_trace = 1e-10;
  double ssf_l1 = 1e-2;
  double trace_formula = 1e-3;
  double moments = 1e-3;
  double diagonal_identity = 1e-9;
  double heavy_ratio = 1.2;
  double bounded_ratio_deviation = 0.05;

  nlohmann::json to_json() const;
};

struct ExperimentConfig {
  enum class Ensemble { gue_like, diagonal_heavy_tail, fixed_matrix_file };

  std::uint64_t seed = 0;
  int dimension = 4;
  int order = 2;
  Ensemble ensemble = Ensemble::gue_like;
  std::vector<FunctionFamily> functions;
  std::vector<FunctionFamily> held_out;
  Tolerances tolerances;
  std::optional<std::vector<std::string>> checks;
  std::string matrix_a;
  std::string matrix_b;
  TraceModel trace_model;
  double p = 2.0;
  std::vector<int> counterexample_dims{16, 64, 256, 1024, 4096};
  double counterexample_t0 = 1.0;
  nlohmann::json source = nlohmann::json::object();

  /// Throws ConfigError. Relative matrix paths resolve against `base_dir`.
  static ExperimentConfig from_json(const nlohmann::json& j, const std::string& base_dir = "");
  static ExperimentConfig load(const std::string& path);
};

struct MatrixPair {
  HermitianMatrix a;
  HermitianMatrix b;
};

/// gue_like: G with iid (N + iN)/sqrt(2) entries drawn row-major, A = (G + G^*)/(2 sqrt d),
/// then B the same way rescaled to |B|_inf = 1. diagonal_heavy_tail: A = I,
/// B = diag((k/d)^{-1/(1.5 p)}). fixed_matrix_file: matrix_a / matrix_b.
MatrixPair generate_ensemble(const ExperimentConfig& config, std::uint64_t seed);
MatrixPair generate_ensemble(const ExperimentConfig& config);

/// Seeded draws for the checks.
HermitianMatrix random_hermitian(int d, std::uint64_t seed, double operator_norm = 0.0);
Matrix random_complex(int d, std::uint64_t seed);

struct CheckRecord {
  std::string name;
  std::string tag;
  double measured = 0.0;
  double threshold = 0.0;
  bool pass = false;
  std::optional<std::string> error;
  nlohmann::json details = nlohmann::json::object();
};

struct Report {
  nlohmann::json config;
  std::string suite;
  std::vector<CheckRecord> records;
  std::vector<std::string> artifacts;
  double wall_time_s = 0.0;

  bool pass() const;
  nlohmann::ordered_json to_json() const;
};

/// Names of the checks a suite runs, in execution order.
std::vector<std::string> suite_checks(const std::string& suite);

/// Runs the suite's checks (restricted to and ordered by config.checks when
/// present), writing report.json and artifacts into out_dir when nonempty.
/// Throws ConfigError for unknown suites or check names.
Report run_suite(const ExperimentConfig& config, const std::string& suite, const std::string& out_dir = "");

}  // namespace moilab
