#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "moilab/error.hpp"
#include "moilab/harness.hpp"
#include "moilab/matrix_io.hpp"
#include "moilab/rng.hpp"
#include "moilab/ssf.hpp"
#include "moilab/taylor.hpp"

namespace fs = std::filesystem;
using namespace moilab;

namespace {

constexpr int kExitFail = 1;
constexpr int kExitUsage = 2;

std::vector<int> parse_dims(const std::string& s) {
  std::vector<int> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      std::size_t used = 0;
      const int v = std::stoi(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw ConfigError("cannot parse dimension '" + item + "'");
    }
  }
  return out;
}

int cmd_run(const std::string& config_path, const std::string& suite, const std::string& out) {
  const ExperimentConfig config = ExperimentConfig::load(config_path);
  const Report rep = run_suite(config, suite, out);
  for (const auto& r : rep.records) {
    std::cout << (r.pass ? "PASS " : "FAIL ") << r.name << " measured=" << r.measured << " threshold=" << r.threshold;
    if (r.error) std::cout << " error=\"" << *r.error << '"';
    std::cout << '\n';
  }
  std::cout << "report: " << (fs::path(out) / "report.json").string() << '\n';
  return rep.pass() ? 0 : kExitFail;
}

int cmd_ssf(const std::string& a_path, const std::string& b_path, int order, const std::string& out) {
  const HermitianMatrix a(load_matrix(a_path));
  const HermitianMatrix b(load_matrix(b_path));
  if (a.dim() != b.dim()) throw DimensionMismatch("matrix files differ in dimension");
  if (order < 1) throw ParameterError("--order must be >= 1");
  const SSFGrid g = order == 1 ? krein_ssf(a, b) : higher_ssf_fourier(a, b, order);
  if (out.empty() || out == "-") {
    std::cout << g.to_csv();
  } else {
    g.save(out);
    std::cout << "wrote " << out << " and " << out << ".json (l1_norm=" << g.l1_norm << ")\n";
  }
  return 0;
}

int cmd_deriv(const std::string& f_spec, int k, double t, std::uint64_t seed, int dim, const std::string& a_path,
              const std::string& b_path) {
  nlohmann::json spec;
  try {
    spec = nlohmann::json::parse(f_spec);
  } catch (const nlohmann::json::parse_error&) {
    spec = {{"id", f_spec}};
  }
  const FunctionFamily f = family_from_json(spec);
  if (a_path.empty() != b_path.empty()) throw ConfigError("--matrix-a and --matrix-b go together");
  ExperimentConfig c;
  c.seed = seed;
  c.dimension = dim;
  if (!a_path.empty()) {
    c.ensemble = ExperimentConfig::Ensemble::fixed_matrix_file;
    c.matrix_a = a_path;
    c.matrix_b = b_path;
  }
  const MatrixPair pair = generate_ensemble(c, derive_seed(seed, "deriv"));
  const DerivativeResult r = gateaux_derivative(f, pair.a, pair.b, k, t);
  const Matrix fd = finite_difference_oracle(f, pair.a, pair.b, k, t, default_fd_step(pair.b), 3);
  nlohmann::ordered_json j;
  j["f"] = f.to_json();
  j["k"] = k;
  j["t"] = t;
  j["derivative"] = matrix_to_json(r.value);
  j["finite_difference_relative_error"] = relative_difference(r.value, fd, 1.0);
  j["warnings"] = r.warnings;
  std::cout << j.dump(2) << '\n';
  return 0;
}

int cmd_counterexample(double p, const std::string& dims, double t0, const std::string& out) {
  const DivergenceTable t = lp_counterexample_demo(p, parse_dims(dims), t0);
  if (out.empty() || out == "-") {
    std::cout << t.to_csv();
  } else {
    std::ofstream f(out);
    if (!f) throw Error("cannot write " + out);
    f << t.to_csv();
    std::cout << "wrote " << out << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"moi-lab: multiple operator integrals, operator Taylor expansions and spectral shift functions"};
  app.require_subcommand(1);

  std::string config_path, suite = "all", out_dir = "out";
  auto* run = app.add_subcommand("run", "Run a check suite and write report.json");
  run->add_option("--config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("--suite", suite, "all|derivatives|perturbation|moi_consistency|ssf|counterexample");
  run->add_option("--out", out_dir, "Output directory");

  std::string a_path, b_path, ssf_out;
  int order = 1;
  auto* ssf = app.add_subcommand("ssf", "Compute a spectral shift function on a grid (CSV + JSON sidecar)");
  ssf->add_option("--matrix-a", a_path, "Base operator (.json or .csv)")->required()->check(CLI::ExistingFile);
  ssf->add_option("--matrix-b", b_path, "Perturbation (.json or .csv)")->required()->check(CLI::ExistingFile);
  ssf->add_option("--order", order, "Order n (1 = counting function, n >= 2 Fourier inversion)");
  ssf->add_option("--out", ssf_out, "Output CSV path ('-' for stdout)");

  std::string f_spec = "exp", da, db;
  int k = 1, dim = 4;
  double t = 0.0;
  std::uint64_t seed = 0;
  auto* deriv = app.add_subcommand("deriv", "k-th Gateaux derivative of f(A + tB) in direction B");
  deriv->add_option("--f", f_spec, "Function id or JSON spec");
  deriv->add_option("--k", k, "Derivative order");
  deriv->add_option("--t", t, "Base point t");
  deriv->add_option("--seed", seed, "Seed for random A, B");
  deriv->add_option("--dim", dim, "Dimension for random A, B");
  deriv->add_option("--matrix-a", da, "Base operator file")->check(CLI::ExistingFile);
  deriv->add_option("--matrix-b", db, "Direction file")->check(CLI::ExistingFile);

  double p = 2.0, t0 = 1.0;
  std::string dims = "16,64,256,1024,4096", ce_out;
  auto* ce = app.add_subcommand("counterexample", "Divergence table for the non-differentiable Schatten-norm example");
  ce->add_option("--p", p, "Schatten exponent");
  ce->add_option("--dims", dims, "Comma-separated dimensions");
  ce->add_option("--t0", t0, "t = t0 / d");
  ce->add_option("--out", ce_out, "Output CSV path ('-' for stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (*run) return cmd_run(config_path, suite, out_dir);
    if (*ssf) return cmd_ssf(a_path, b_path, order, ssf_out);
    if (*deriv) return cmd_deriv(f_spec, k, t, seed, dim, da, db);
    if (*ce) return cmd_counterexample(p, dims, t0, ce_out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFail;
  }
  return kExitUsage;
}
