#include "moilab/harness.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <set>

#include "moilab/error.hpp"
#include "moilab/matrix_io.hpp"
#include "moilab/moi.hpp"
#include "moilab/rng.hpp"
#include "moilab/ssf.hpp"
#include "moilab/taylor.hpp"

namespace moilab {

namespace fs = std::filesystem;

// ---------------------------------------------------------------- config

namespace {

const std::map<std::string, double Tolerances::*>& tolerance_fields() {
  static const std::map<std::string, double Tolerances::*> m{
      {"derivative", &Tolerances::derivative},
      {"slope_deviation", &Tolerances::slope_deviation},
      {"remainder", &Tolerances::remainder},
      {"perturbation_first", &Tolerances::perturbation_first},
      {"perturbation_higher", &Tolerances::perturbation_higher},
      {"telescoping", &Tolerances::telescoping},
      {"continuity_slope_deviation", &Tolerances::continuity_slope_deviation},
      {"moi_cross_form", &Tolerances::moi_cross_form},
      {"multilinearity", &Tolerances::multilinearity},
      {"discretized_final", &Tolerances::discretized_final},
      {"discretized_ratio", &Tolerances::discretized_ratio},
      {"counting_trace", &Tolerances::counting_trace},
      {"ssf_l1", &Tolerances::ssf_l1},
      {"trace_formula", &Tolerances::trace_formula},
      {"moments", &Tolerances::moments},
      {"diagonal_identity", &Tolerances::diagonal_identity},
      {"heavy_ratio", &Tolerances::heavy_ratio},
      {"bounded_ratio_deviation", &Tolerances::bounded_ratio_deviation},
  };
  return m;
}

std::vector<FunctionFamily> parse_families(const nlohmann::json& j, const char* key) {
  if (!j.is_array()) throw ConfigError(std::string("'") + key + "' must be an array of function specs");
  std::vector<FunctionFamily> out;
  for (const auto& e : j) {
    try {
      out.push_back(family_from_json(e));
    } catch (const Error& err) {
      throw ConfigError(std::string("'") + key + "': " + err.what());
    }
  }
  return out;
}

template <class T>
T get_as(const nlohmann::json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("'") + key + "' has the wrong type");
  }
}

}  // namespace

nlohmann::json Tolerances::to_json() const {
  nlohmann::json j;
  for (const auto& [k, ptr] : tolerance_fields()) j[k] = this->*ptr;
  return j;
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j, const std::string& base_dir) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  static const std::set<std::string> known{"seed",     "dimension", "order",    "ensemble",       "functions",
                                           "held_out", "tolerances", "checks",  "matrix_a",       "matrix_b",
                                           "trace_model", "p",      "counterexample", "description", "outputs"};
  for (const auto& [k, v] : j.items()) {
    if (!known.count(k)) throw ConfigError("unknown config key '" + k + "'");
  }
  ExperimentConfig c;
  c.source = j;
  if (!j.contains("seed")) throw ConfigError("'seed' is required");
  const auto& seed = j["seed"];
  if (!seed.is_number_integer() || (!seed.is_number_unsigned() && seed.get<std::int64_t>() < 0)) {
    throw ConfigError("'seed' must be a non-negative integer");
  }
  c.seed = seed.get<std::uint64_t>();
  if (j.contains("dimension")) c.dimension = get_as<int>(j, "dimension");
  if (c.dimension < 1) throw ConfigError("'dimension' must be >= 1");
  if (j.contains("order")) c.order = get_as<int>(j, "order");
  if (c.order < 1 || c.order > 4) throw ConfigError("'order' must lie in 1..4");

  const std::string ens = j.contains("ensemble") ? get_as<std::string>(j, "ensemble") : "gue_like";
  if (ens == "gue_like") {
    c.ensemble = Ensemble::gue_like;
  } else if (ens == "diagonal_heavy_tail") {
    c.ensemble = Ensemble::diagonal_heavy_tail;
  } else if (ens == "fixed_matrix_file") {
    c.ensemble = Ensemble::fixed_matrix_file;
  } else {
    throw ConfigError("unknown ensemble '" + ens + "'");
  }

  c.functions = j.contains("functions") ? parse_families(j["functions"], "functions")
                                        : std::vector<FunctionFamily>{families::exponential(), families::gaussian(),
                                                                      families::rational()};
  c.held_out = j.contains("held_out") ? parse_families(j["held_out"], "held_out")
                                      : std::vector<FunctionFamily>{families::gaussian(), families::rational(),
                                                                    families::bump(0.0, 3.0)};
  if (j.contains("tolerances")) {
    const auto& t = j["tolerances"];
    if (!t.is_object()) throw ConfigError("'tolerances' must be an object");
    for (const auto& [k, v] : t.items()) {
      const auto it = tolerance_fields().find(k);
      if (it == tolerance_fields().end()) throw ConfigError("unknown tolerance '" + k + "'");
      if (!v.is_number() || !(v.get<double>() > 0.0)) throw ConfigError("tolerance '" + k + "' must be positive");
      c.tolerances.*(it->second) = v.get<double>();
    }
  }
  if (j.contains("checks")) {
    if (!j["checks"].is_array()) throw ConfigError("'checks' must be an array of names");
    std::vector<std::string> names;
    for (const auto& e : j["checks"]) {
      if (!e.is_string()) throw ConfigError("'checks' entries must be strings");
      names.push_back(e.get<std::string>());
    }
    c.checks = names;
  }
  auto resolve = [&](const std::string& p) {
    if (p.empty() || base_dir.empty() || fs::path(p).is_absolute()) return p;
    return (fs::path(base_dir) / p).string();
  };
  if (j.contains("matrix_a")) c.matrix_a = resolve(get_as<std::string>(j, "matrix_a"));
  if (j.contains("matrix_b")) c.matrix_b = resolve(get_as<std::string>(j, "matrix_b"));
  if (c.ensemble == Ensemble::fixed_matrix_file && (c.matrix_a.empty() || c.matrix_b.empty())) {
    throw ConfigError("fixed_matrix_file needs 'matrix_a' and 'matrix_b'");
  }
  if (j.contains("p")) c.p = get_as<double>(j, "p");
  if (!(c.p > 1.0) || !std::isfinite(c.p)) throw ConfigError("'p' must satisfy 1 < p < inf");
  if (j.contains("trace_model")) {
    const auto m = get_as<std::string>(j, "trace_model");
    if (m == "standard") {
      c.trace_model = TraceModel::standard();
    } else if (m == "weighted_diagonal") {
      c.trace_model = TraceModel::uniform(c.dimension);
    } else {
      throw ConfigError("unknown trace_model '" + m + "'");
    }
  }
  if (j.contains("counterexample")) {
    const auto& ce = j["counterexample"];
    if (!ce.is_object()) throw ConfigError("'counterexample' must be an object");
    if (ce.contains("dims")) c.counterexample_dims = get_as<std::vector<int>>(ce, "dims");
    if (ce.contains("t0")) c.counterexample_t0 = get_as<double>(ce, "t0");
    for (std::size_t i = 0; i < c.counterexample_dims.size(); ++i) {
      if (c.counterexample_dims[i] < 1 || (i && c.counterexample_dims[i] <= c.counterexample_dims[i - 1])) {
        throw ConfigError("counterexample dims must be positive and increasing");
      }
    }
    if (!(c.counterexample_t0 > 0.0)) throw ConfigError("counterexample t0 must be positive");
  }
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return from_json(j, fs::path(path).parent_path().string());
}

// ------------------------------------------------------------- ensembles

HermitianMatrix random_hermitian(int d, std::uint64_t seed, double operator_norm) {
  SplitMix64 rng(seed);
  Matrix g(d, d);
  for (int i = 0; i < d; ++i)
    for (int k = 0; k < d; ++k) {
      const double re = rng.normal();
      const double im = rng.normal();
      g(i, k) = cplx(re, im) / std::sqrt(2.0);
    }
  Matrix h = (g + g.adjoint()) / (2.0 * std::sqrt(static_cast<double>(d)));
  if (operator_norm > 0.0) {
    const double nrm = schatten_norm(h, std::numeric_limits<double>::infinity());
    if (nrm > 0.0) h *= operator_norm / nrm;
  }
  return HermitianMatrix(h);
}

Matrix random_complex(int d, std::uint64_t seed) {
  SplitMix64 rng(seed);
  Matrix g(d, d);
  for (int i = 0; i < d; ++i)
    for (int k = 0; k < d; ++k) {
      const double re = rng.normal();
      const double im = rng.normal();
      g(i, k) = cplx(re, im) / std::sqrt(2.0 * d);
    }
  return g;
}

MatrixPair generate_ensemble(const ExperimentConfig& c, std::uint64_t seed) {
  switch (c.ensemble) {
    case ExperimentConfig::Ensemble::gue_like: {
      SplitMix64 streams(seed);
      const std::uint64_t sa = streams.next();
      const std::uint64_t sb = streams.next();
      return {random_hermitian(c.dimension, sa), random_hermitian(c.dimension, sb, 1.0)};
    }
    case ExperimentConfig::Ensemble::diagonal_heavy_tail: {
      std::vector<double> b(static_cast<std::size_t>(c.dimension));
      for (int k = 1; k <= c.dimension; ++k) {
        b[static_cast<std::size_t>(k - 1)] = std::pow(static_cast<double>(k) / c.dimension, -1.0 / (1.5 * c.p));
      }
      return {HermitianMatrix::identity(c.dimension), HermitianMatrix::diagonal(b)};
    }
    case ExperimentConfig::Ensemble::fixed_matrix_file: {
      HermitianMatrix a(load_matrix(c.matrix_a));
      HermitianMatrix b(load_matrix(c.matrix_b));
      if (a.dim() != b.dim()) throw ConfigError("matrix files differ in dimension");
      return {a, b};
    }
  }
  throw ConfigError("unknown ensemble");
}

MatrixPair generate_ensemble(const ExperimentConfig& c) { return generate_ensemble(c, c.seed); }

// ---------------------------------------------------------------- report

bool Report::pass() const {
  for (const auto& r : records)
    if (!r.pass) return false;
  return true;
}

nlohmann::ordered_json Report::to_json() const {
  nlohmann::ordered_json j;
  j["suite"] = suite;
  j["config"] = config;
  nlohmann::ordered_json recs = nlohmann::ordered_json::array();
  for (const auto& r : records) {
    nlohmann::ordered_json e;
    e["name"] = r.name;
    e["tag"] = r.tag;
    e["measured"] = std::isfinite(r.measured) ? nlohmann::ordered_json(r.measured) : nlohmann::ordered_json(nullptr);
    e["threshold"] = r.threshold;
    e["pass"] = r.pass;
    if (r.error) e["error"] = *r.error;
    e["details"] = r.details;
    recs.push_back(std::move(e));
  }
  j["records"] = std::move(recs);
  j["artifacts"] = artifacts;
  j["pass"] = pass();
  j["wall_time_s"] = wall_time_s;
  return j;
}

// ---------------------------------------------------------------- checks

namespace {

constexpr double kReportOnly = std::numeric_limits<double>::max();

struct Outcome {
  double measured = 0.0;
  double threshold = 0.0;
  nlohmann::json details = nlohmann::json::object();
};

struct Context {
  const ExperimentConfig& config;
  std::string out_dir;
  std::vector<std::string> artifacts;
  std::map<std::string, MatrixPair> pairs;
  std::optional<SSFGrid> eta;

  const MatrixPair& pair(const std::string& group) {
    auto it = pairs.find(group);
    if (it == pairs.end()) it = pairs.emplace(group, generate_ensemble(config, derive_seed(config.seed, group))).first;
    return it->second;
  }

  std::string artifact(const std::string& name) {
    if (out_dir.empty()) return {};
    const std::string path = (fs::path(out_dir) / name).string();
    artifacts.push_back(name);
    return path;
  }

  const SSFGrid& higher_eta() {
    if (!eta) {
      const MatrixPair& p = pair("ssf");
      eta = higher_ssf_fourier(p.a, p.b, config.order);
      eta->seed = config.seed;
      const std::string path = artifact("eta_" + std::to_string(config.order) + ".csv");
      if (!path.empty()) {
        eta->save(path);
        artifacts.push_back("eta_" + std::to_string(config.order) + ".csv.json");
      }
    }
    return *eta;
  }
};

double frob_rel(const Matrix& x, const Matrix& ref) { return (x - ref).norm() / std::max(1.0, ref.norm()); }

int capped(int order, int cap) { return std::min(order, cap); }

std::string fid(const FunctionFamily& f) { return f.to_json().dump(); }

Outcome check_derivative_formula(Context& ctx) {
  const auto& c = ctx.config;
  const MatrixPair& p = ctx.pair("derivatives");
  Outcome o{0.0, c.tolerances.derivative, nlohmann::json::array()};
  const double h = default_fd_step(p.b);
  for (const auto& f : c.functions) {
    for (int k = 1; k <= capped(c.order, 3) && k <= f.max_order(); ++k) {
      const Matrix g = gateaux_derivative(f, p.a, p.b, k, 0.3).value;
      const Matrix fd = finite_difference_oracle(f, p.a, p.b, k, 0.3, h, 3);
      const double err = frob_rel(g, fd);
      o.measured = std::max(o.measured, err);
      o.details.push_back({{"f", fid(f)}, {"k", k}, {"relative_error", err}});
    }
  }
  return o;
}

Outcome check_fd_slope(Context& ctx) {
  const auto& c = ctx.config;
  const MatrixPair& p = ctx.pair("derivatives");
  Outcome o{0.0, c.tolerances.slope_deviation, nlohmann::json::array()};
  const FunctionFamily f = families::gaussian();
  const std::vector<double> hs{0.08, 0.04, 0.02, 0.01, 0.005};
  for (int k = 1; k <= capped(c.order, 3); ++k) {
    const Matrix g = gateaux_derivative(f, p.a, p.b, k, 0.3).value;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    nlohmann::json errs = nlohmann::json::array();
    for (double h : hs) {
      const double e = frob_rel(finite_difference_oracle(f, p.a, p.b, k, 0.3, h, 0), g);
      errs.push_back(e);
      const double x = std::log(h), y = std::log(e);
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
    }
    const double n = static_cast<double>(hs.size());
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    o.measured = std::max(o.measured, std::abs(slope - 2.0));
    o.details.push_back({{"k", k}, {"slope", slope}, {"errors", errs}, {"steps", hs}});
  }
  return o;
}

Outcome check_remainder(Context& ctx) {
  const auto& c = ctx.config;
  const MatrixPair& p = ctx.pair("derivatives");
  Outcome o{0.0, c.tolerances.remainder, nlohmann::json::array()};
  for (const auto& f : c.functions) {
    for (int n = 1; n <= capped(c.order, 3) && n <= f.max_order(); ++n) {
      const auto r = taylor_remainder(f, p.a, p.b, n, std::numeric_limits<double>::infinity());
      o.measured = std::max(o.measured, r.relative_difference);
      o.details.push_back({{"f", fid(f)}, {"n", n}, {"relative_difference", r.relative_difference}});
    }
  }
  return o;
}

Outcome check_first_order(Context& ctx) {
  const auto& c = ctx.config;
  const MatrixPair& p = ctx.pair("perturbation");
  Outcome o{0.0, c.tolerances.perturbation_first, nlohmann::json::array()};
  const HermitianMatrix other = p.a + p.b;
  for (const auto& f : c.functions) {
    const double r = perturbation_first_order(f, p.a, other, std::numeric_limits<double>::infinity());
    o.measured = std::max(o.measured, r);
    o.details.push_back({{"f", fid(f)}, {"residual", r}});
  }
  return o;
}

Outcome check_higher_order(Context& ctx) {
  const auto& c = ctx.config;
  const MatrixPair& p = ctx.pair("perturbation");
  Outcome o{0.0, c.tolerances.perturbation_higher, nlohmann::json::array()};
  const HermitianMatrix other = p.a + p.b;
  const std::uint64_t base = derive_seed(c.seed, "perturbation_higher_order");
  for (int k = 1; k <= 2; ++k) {
    std::vector<HermitianMatrix> ops;
    std::vector<Matrix> xs;
    for (int i = 0; i < k; ++i) {
      ops.push_back(random_hermitian(c.dimension, base + 2 * static_cast<std::uint64_t>(i) + 10 * k));
      xs.push_back(random_complex(c.dimension, base + 2 * static_cast<std::uint64_t>(i) + 1 + 10 * k));
    }
    for (const auto& f : c.functions) {
      if (k + 1 > f.max_order()) continue;
      for (int j = 1; j <= k + 1; ++j) {
        const double r = perturbation_higher_order(f, p.a, other, ops, xs, j, std::numeric_limits<double>::infinity());
        o.measured = std::max(o.measured, r);
        o.details.push_back({{"f", fid(f)}, {"k", k}, {"j", j}, {"residual", r}});
      }
    }
  }
  return o;
}

Outcome check_telescoping(Context& ctx) {
  const auto& c = ctx.config;
  const MatrixPair& p = ctx.pair("perturbation");
  Outcome o{0.0, c.tolerances.telescoping, nlohmann::json::array()};
  const int n = std::max(2, capped(c.order, 3));
  for (const auto& f : c.functions) {
    if (n > f.max_order()) continue;
    for (int j = 1; j <= n; ++j) {
      const double r = telescoping_check(f, p.a, p.b, n, 0.7, j, std::numeric_limits<double>::infinity());
      o.measured = std::max(o.measured, r);
      o.details.push_back({{"f", fid(f)}, {"n", n}, {"j", j}, {"t", 0.7}, {"residual", r}});
    }
  }
  return o;
}

Outcome check_continuity(Context& ctx) {
  const auto& c = ctx.config;
  const MatrixPair& p = ctx.pair("perturbation");
  Outcome o{0.0, c.tolerances.continuity_slope_deviation, nlohmann::json::array()};
  std::vector<double> grid{0.0};
  for (double t : {1e-2, 1e-3, 1e-4, 1e-5}) {
    grid.push_back(t);
    grid.push_back(-t);
  }
  const int n = capped(c.order, 3);
  for (const auto& f : c.functions) {
    if (n + 1 > f.max_order()) continue;
    const ContinuityReport r = continuity_probe(f, p.a, p.b, n, grid, 1, 2.0);
    if (!r.bound_holds) throw ConsistencyError("continuity modulus exceeds the linear bound", r.max_modulus, 0.0, 0.0);
    const double dev = std::isfinite(r.slope) ? std::abs(r.slope - 1.0) : 0.0;
    o.measured = std::max(o.measured, dev);
    o.details.push_back({{"f", fid(f)}, {"n", n}, {"report", r.to_json()}});
  }
  return o;
}

MOIOperands random_operands(const ExperimentConfig& c, int n, std::uint64_t seed) {
  MOIOperands ops;
  for (int i = 0; i <= n; ++i) ops.operators.push_back(eig_hermitian(random_hermitian(c.dimension, seed + 2 * i)));
  for (int i = 0; i < n; ++i) ops.arguments.push_back(random_complex(c.dimension, seed + 2 * i + 1));
  return ops;
}

Outcome check_factorized(Context& ctx) {
  const auto& c = ctx.config;
  Outcome o{0.0, c.tolerances.moi_cross_form, nlohmann::json::array()};
  const int n = capped(c.order, 3);
  const MOIOperands ops = random_operands(c, n, derive_seed(c.seed, "moi_factorized_agreement"));
  for (double s : {0.7, -1.9}) {
    const Symbol sym = fourier_divided_difference_symbol(s, n, 12);
    const double err = relative_difference(moi_projection_sum(sym, ops).value, moi_factorized(sym, ops).value, 1.0);
    o.measured = std::max(o.measured, err);
    o.details.push_back({{"symbol", "fourier_divided_difference"}, {"s", s}, {"relative_error", err}});
  }
  // pure exponential tensor product
  FactorTerm term{1.0, {}};
  for (int i = 0; i <= n; ++i) term.factors.push_back(families::fourier(1.1));
  const Symbol ex = Symbol::factorized({term});
  const double err = relative_difference(moi_projection_sum(ex, ops).value, moi_factorized(ex, ops).value, 1.0);
  o.measured = std::max(o.measured, err);
  o.details.push_back({{"symbol", "exponential_product"}, {"relative_error", err}});
  return o;
}

Outcome check_multilinearity(Context& ctx) {
  const auto& c = ctx.config;
  Outcome o{0.0, c.tolerances.multilinearity, nlohmann::json::array()};
  const int n = capped(c.order, 3);
  const std::uint64_t seed = derive_seed(c.seed, "moi_multilinearity");
  MOIOperands ops = random_operands(c, n, seed);
  const Matrix extra = random_complex(c.dimension, seed + 1000);
  const cplx alpha(0.3, -1.2);
  for (const auto& f : c.functions) {
    if (n > f.max_order()) continue;
    const Symbol sym = Symbol::divided_difference(f, n);
    for (int slot = 0; slot < n; ++slot) {
      MOIOperands combined = ops, second = ops;
      const auto s = static_cast<std::size_t>(slot);
      combined.arguments[s] = alpha * ops.arguments[s] + extra;
      second.arguments[s] = extra;
      const Matrix lhs = moi_projection_sum(sym, combined).value;
      const Matrix rhs = alpha * moi_projection_sum(sym, ops).value + moi_projection_sum(sym, second).value;
      const double err = relative_difference(lhs, rhs, 1.0);
      o.measured = std::max(o.measured, err);
      o.details.push_back({{"f", fid(f)}, {"slot", slot}, {"relative_error", err}});
    }
  }
  return o;
}

// Operators with eigenvalues a/16 + 1/16 - 2^-12 (a integer) and random
// eigenvectors: each doubling of m from 16 to 4096 halves the bin offset.
struct DiscretizedSeries {
  std::vector<int> ms;
  std::vector<double> errors;
  std::vector<double> generic_errors;
};

DiscretizedSeries discretized_series(const ExperimentConfig& c) {
  const int n = capped(c.order, 3);
  const std::uint64_t seed = derive_seed(c.seed, "moi_discretized");
  SplitMix64 rng(seed);
  MOIOperands aligned;
  for (int i = 0; i <= n; ++i) {
    Eigen::VectorXd ev(c.dimension);
    for (int k = 0; k < c.dimension; ++k) {
      const int a = static_cast<int>(std::floor(rng.uniform() * 48.0)) - 24;
      ev(k) = a / 16.0 + 1.0 / 16.0 - std::ldexp(1.0, -12);
    }
    std::sort(ev.data(), ev.data() + ev.size());
    const EigenSystem basis = eig_hermitian(random_hermitian(c.dimension, rng.next()));
    aligned.operators.push_back(EigenSystem::from_spectral(ev, basis.basis));
  }
  for (int i = 0; i < n; ++i) aligned.arguments.push_back(random_complex(c.dimension, rng.next()));
  MOIOperands generic = random_operands(c, n, rng.next());

  const Symbol sym = Symbol::divided_difference(families::gaussian(), n);
  const Matrix exact = moi_projection_sum(sym, aligned).value;
  const Matrix exact_generic = moi_projection_sum(sym, generic).value;
  DiscretizedSeries out;
  for (int m = 16; m <= 4096; m *= 2) {
    out.ms.push_back(m);
    out.errors.push_back((moi_discretized(sym, aligned, m, 4 * m).value - exact).norm());
    out.generic_errors.push_back((moi_discretized(sym, generic, m, 4 * m).value - exact_generic).norm());
  }
  return out;
}

Outcome check_discretized_ratio(Context& ctx) {
  const DiscretizedSeries s = discretized_series(ctx.config);
  Outcome o{0.0, ctx.config.tolerances.discretized_ratio, nlohmann::json::object()};
  std::vector<double> ratios;
  for (std::size_t i = 1; i < s.errors.size(); ++i) {
    const double r = s.errors[i - 1] > 0.0 ? s.errors[i] / s.errors[i - 1] : 0.0;
    ratios.push_back(r);
    o.measured = std::max(o.measured, r);
  }
  o.details = {{"m", s.ms}, {"errors", s.errors}, {"ratios", ratios}, {"generic_spectrum_errors", s.generic_errors}};
  return o;
}

Outcome check_discretized_final(Context& ctx) {
  const DiscretizedSeries s = discretized_series(ctx.config);
  return {s.errors.back(), ctx.config.tolerances.discretized_final, {{"m", s.ms.back()}}};
}

Outcome check_norm_ratio(Context& ctx) {
  const auto& c = ctx.config;
  const int n = capped(c.order, 3);
  const std::uint64_t seed = derive_seed(c.seed, "moi_norm_ratio");
  MOIOperands ops = random_operands(c, n, seed);
  ops.exponents.assign(static_cast<std::size_t>(n), n * c.p);
  const NormReport fr = moi_norm_report(fourier_divided_difference_symbol(1.3, n, 12), ops, c.p);
  double max_dd = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    MOIOperands t = random_operands(c, n, seed + 1000 + 100 * static_cast<std::uint64_t>(trial));
    t.exponents = ops.exponents;
    max_dd = std::max(max_dd, moi_norm_report(Symbol::divided_difference(families::gaussian(), n), t, c.p).ratio);
  }
  if (!std::isfinite(max_dd)) throw NumericalError("divided-difference norm ratio is not finite", max_dd);
  return {fr.ratio, *fr.bound, {{"factorized", fr.to_json()}, {"divided_difference_max_ratio", max_dd}, {"trials", 100}}};
}

Outcome check_counting_trace(Context& ctx) {
  const auto& c = ctx.config;
  const MatrixPair& p = ctx.pair("ssf");
  const SSFGrid k = krein_ssf(p.a, p.b);
  Outcome o{0.0, c.tolerances.counting_trace, nlohmann::json::array()};
  const EigenSystem ea = eig_hermitian(p.a), eab = eig_hermitian(p.a + p.b);
  for (const auto& f : c.functions) {
    const cplx lhs = (apply_function(f, eab) - apply_function(f, ea)).trace();
    const cplx rhs = pair_with_derivative(k, f);
    const double err = std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs));
    o.measured = std::max(o.measured, err);
    o.details.push_back({{"f", fid(f)}, {"relative_error", err}});
  }
  return o;
}

Outcome check_fourier_vs_counting(Context& ctx) {
  const MatrixPair& p = ctx.pair("ssf");
  const SSFGrid k = krein_ssf(p.a, p.b);
  const SSFGrid f = higher_ssf_fourier(p.a, p.b, 1);
  const double d = ssf_l1_distance(f, k);
  return {d, ctx.config.tolerances.ssf_l1, {{"l1_counting", k.l1_norm}, {"l1_fourier", f.l1_norm}, {"params", f.params}}};
}

Outcome check_trace_formula(Context& ctx) {
  const auto& c = ctx.config;
  const MatrixPair& p = ctx.pair("ssf");
  const TraceFormulaReport r = verify_trace_formula(p.a, p.b, c.order, ctx.higher_eta(), c.held_out);
  return {r.max_function_error(), c.tolerances.trace_formula, r.to_json()["functions"]};
}

Outcome check_moments(Context& ctx) {
  const auto& c = ctx.config;
  const MatrixPair& p = ctx.pair("ssf");
  const TraceFormulaReport r = verify_trace_formula(p.a, p.b, c.order, ctx.higher_eta(), {});
  return {r.max_moment_error(), c.tolerances.moments, r.to_json()["moments"]};
}

Outcome diagonal_symbol(Context& ctx, bool pairing) {
  const auto& c = ctx.config;
  if (c.order < 2) throw ConfigError("the restricted-symbol trace identity needs order >= 2");
  const MatrixPair& p = ctx.pair("ssf");
  Outcome o{0.0, pairing ? c.tolerances.trace_formula : c.tolerances.diagonal_identity, nlohmann::json::array()};
  for (const auto& f : c.held_out) {
    const DiagonalSymbolReport r = diagonal_symbol_trace(p.a, p.b, c.order, f, pairing ? &ctx.higher_eta() : nullptr);
    o.measured = std::max(o.measured, pairing ? *r.pairing_error : r.identity_error);
    auto d = r.to_json();
    d["f"] = fid(f);
    o.details.push_back(d);
  }
  return o;
}

Outcome check_l1_ratio(Context& ctx) {
  const MatrixPair& p = ctx.pair("ssf");
  const L1Report r = ssf_l1_report(p.b, ctx.config.order, ctx.higher_eta());
  if (!std::isfinite(r.ratio)) throw NumericalError("l1 ratio is not finite", r.ratio);
  return {r.ratio, kReportOnly, r.to_json()};
}

Outcome check_heavy(Context& ctx) {
  const auto& c = ctx.config;
  const DivergenceTable t = lp_counterexample_demo(c.p, c.counterexample_dims, c.counterexample_t0);
  const std::string path = ctx.artifact("counterexample.csv");
  if (!path.empty()) {
    std::ofstream out(path);
    out << t.to_csv();
  }
  const auto r = t.heavy_ratios();
  if (r.empty()) throw ConfigError("counterexample needs at least two dimensions");
  const double worst = *std::min_element(r.begin(), r.end());
  return {1.0 / worst, 1.0 / c.tolerances.heavy_ratio, t.to_json()};
}

Outcome check_bounded(Context& ctx) {
  const auto& c = ctx.config;
  const DivergenceTable t = lp_counterexample_demo(c.p, c.counterexample_dims, c.counterexample_t0);
  const auto r = t.bounded_ratios();
  if (r.empty()) throw ConfigError("counterexample needs at least two dimensions");
  return {std::abs(r.back() - 1.0), c.tolerances.bounded_ratio_deviation, {{"bounded_ratios", r}}};
}

struct CheckSpec {
  std::string name;
  std::string suite;
  std::string tag;
  std::function<Outcome(Context&)> run;
  int min_order = 1;
};

const std::vector<CheckSpec>& registry() {
  static const std::vector<CheckSpec> specs{
      {"derivative_formula", "derivatives", "derivative-formula", check_derivative_formula},
      {"derivative_fd_slope", "derivatives", "finite-difference-convergence", check_fd_slope},
      {"remainder_two_path", "derivatives", "remainder-closed-form", check_remainder},
      {"perturbation_first_order", "perturbation", "first-order-perturbation", check_first_order},
      {"perturbation_higher_order", "perturbation", "operator-replacement", check_higher_order},
      {"telescoping", "perturbation", "telescoping-sum", check_telescoping},
      {"continuity_modulus", "perturbation", "continuity-at-zero", check_continuity},
      {"moi_factorized_agreement", "moi_consistency", "factorized-integral", check_factorized},
      {"moi_multilinearity", "moi_consistency", "multilinearity", check_multilinearity},
      {"moi_discretized_ratio", "moi_consistency", "discretized-sum", check_discretized_ratio},
      {"moi_discretized_final", "moi_consistency", "discretized-sum", check_discretized_final},
      {"moi_norm_ratio", "moi_consistency", "norm-bound", check_norm_ratio},
      {"ssf_counting_trace_formula", "ssf", "counting-trace-formula", check_counting_trace},
      {"ssf_fourier_vs_counting", "ssf", "fourier-recovery", check_fourier_vs_counting},
      {"ssf_trace_formula_heldout", "ssf", "higher-trace-formula", check_trace_formula},
      {"ssf_moments", "ssf", "moment-identities", check_moments},
      {"ssf_diagonal_symbol_identity", "ssf", "restricted-symbol-trace",
       [](Context& c) { return diagonal_symbol(c, false); }, 2},
      {"ssf_diagonal_symbol_pairing", "ssf", "restricted-symbol-trace",
       [](Context& c) { return diagonal_symbol(c, true); }, 2},
      {"ssf_l1_ratio", "ssf", "ssf-l1-bound", check_l1_ratio},
      {"counterexample_heavy_growth", "counterexample", "lp-nondifferentiability", check_heavy},
      {"counterexample_bounded_convergence", "counterexample", "lp-nondifferentiability", check_bounded},
  };
  return specs;
}

bool suite_known(const std::string& s) {
  return s == "all" || s == "derivatives" || s == "perturbation" || s == "moi_consistency" || s == "ssf" ||
         s == "counterexample";
}

}  // namespace

std::vector<std::string> suite_checks(const std::string& suite) {
  if (!suite_known(suite)) throw ConfigError("unknown suite '" + suite + "'");
  std::vector<std::string> out;
  for (const auto& s : registry())
    if (suite == "all" || s.suite == suite) out.push_back(s.name);
  return out;
}

Report run_suite(const ExperimentConfig& config, const std::string& suite, const std::string& out_dir) {
  const auto start = std::chrono::steady_clock::now();
  const std::vector<std::string> in_suite = suite_checks(suite);
  std::vector<std::string> names;
  if (config.checks) {
    for (const auto& n : *config.checks) {
      const bool exists = std::any_of(registry().begin(), registry().end(), [&](const CheckSpec& s) { return s.name == n; });
      if (!exists) throw ConfigError("unknown check '" + n + "'");
      if (std::find(in_suite.begin(), in_suite.end(), n) != in_suite.end()) names.push_back(n);
    }
  } else {
    // Implicit selection skips checks that do not apply at this order.
    for (const auto& s : registry())
      if (std::find(in_suite.begin(), in_suite.end(), s.name) != in_suite.end() && config.order >= s.min_order)
        names.push_back(s.name);
  }
  if (!out_dir.empty()) fs::create_directories(out_dir);

  Report rep;
  rep.suite = suite;
  rep.config = config.source;
  Context ctx{config, out_dir, {}, {}, std::nullopt};
  for (const auto& name : names) {
    const CheckSpec& spec =
        *std::find_if(registry().begin(), registry().end(), [&](const CheckSpec& s) { return s.name == name; });
    CheckRecord r;
    r.name = name;
    r.tag = spec.tag;
    try {
      Outcome o = spec.run(ctx);
      r.measured = o.measured;
      r.threshold = o.threshold;
      r.details = std::move(o.details);
      r.pass = std::isfinite(r.measured) && r.measured <= r.threshold;
    } catch (const std::exception& e) {
      r.measured = std::numeric_limits<double>::quiet_NaN();
      r.pass = false;
      r.error = e.what();
    }
    rep.records.push_back(std::move(r));
  }
  rep.artifacts = ctx.artifacts;
  rep.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!out_dir.empty()) {
    std::ofstream out(fs::path(out_dir) / "report.json");
    if (!out) throw Error("cannot write report into " + out_dir);
    out << rep.to_json().dump(2) << '\n';
  }
  return rep;
}

}  // namespace moilab
