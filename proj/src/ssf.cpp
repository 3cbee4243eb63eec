#include "moilab/ssf.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "moilab/error.hpp"
#include "moilab/parallel.hpp"
#include "moilab/taylor.hpp"

namespace moilab {

namespace {

constexpr double kPi = std::numbers::pi;

double factorial(int n) {
  double r = 1.0;
  for (int i = 2; i <= n; ++i) r *= i;
  return r;
}

void hull(const EigenSystem& a, const EigenSystem& apb, double& lo, double& hi) {
  lo = std::min(a.eigenvalues.minCoeff(), apb.eigenvalues.minCoeff());
  hi = std::max(a.eigenvalues.maxCoeff(), apb.eigenvalues.maxCoeff());
}

double trapezoid_abs(const std::vector<double>& v, double dt) {
  if (v.size() < 2) return 0.0;
  double acc = 0.5 * (std::abs(v.front()) + std::abs(v.back()));
  for (std::size_t i = 1; i + 1 < v.size(); ++i) acc += std::abs(v[i]);
  return acc * dt;
}

template <class Fn>
cplx trapezoid(const SSFGrid& g, Fn&& weight) {
  if (g.size() < 2) return 0.0;
  cplx acc = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double w = (i == 0 || i + 1 == g.size()) ? 0.5 : 1.0;
    acc += w * weight(g.t(i)) * g.values[i];
  }
  return acc * g.dt;
}

}  // namespace

std::string to_string(SSFGrid::Method m) { return m == SSFGrid::Method::counting ? "counting" : "fourier"; }

double SSFGrid::evaluate(double t) const {
  if (method == Method::counting && !levels.empty()) {
    const auto idx = std::upper_bound(breakpoints.begin(), breakpoints.end(), t) - breakpoints.begin();
    return levels[static_cast<std::size_t>(idx)];
  }
  if (values.empty() || dt <= 0.0) return 0.0;
  const double x = (t - t0) / dt;
  if (x < 0.0 || x > static_cast<double>(values.size() - 1)) return 0.0;
  const auto i = std::min(static_cast<std::size_t>(x), values.size() - 2);
  const double frac = x - static_cast<double>(i);
  return (1.0 - frac) * values[i] + frac * values[i + 1];
}

std::string SSFGrid::to_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "t,value\n";
  for (std::size_t i = 0; i < values.size(); ++i) os << t(i) << ',' << values[i] << '\n';
  return os.str();
}

nlohmann::ordered_json SSFGrid::sidecar() const {
  nlohmann::ordered_json j;
  j["n"] = order;
  j["method"] = to_string(method);
  j["support"] = {support_lo, support_hi};
  j["l1_norm"] = l1_norm;
  j["t0"] = t0;
  j["dt"] = dt;
  j["count"] = values.size();
  j["params"] = params;
  j["seed"] = seed ? nlohmann::json(*seed) : nlohmann::json(nullptr);
  if (method == Method::counting) {
    j["breakpoints"] = breakpoints;
    j["levels"] = levels;
  } else {
    j["imag_residue"] = imag_residue;
  }
  return j;
}

void SSFGrid::save(const std::string& path) const {
  std::ofstream csv(path);
  if (!csv) throw Error("cannot write " + path);
  csv << to_csv();
  std::ofstream js(path + ".json");
  if (!js) throw Error("cannot write " + path + ".json");
  js << sidecar().dump(2) << '\n';
}

void FourierParams::validate() const {
  if (!(s_max > 0.0) || !std::isfinite(s_max)) throw ParameterError("s_max must be positive");
  if (num_s < 2 || num_s % 2 != 0) throw ParameterError("num_s must be even and >= 2");
  if (!(s_min_exclusion >= 0.0) || !(s_min_exclusion < s_max)) {
    throw ParameterError("s_min_exclusion must lie in [0, s_max)");
  }
  if (!(t_step > 0.0)) throw ParameterError("t_step must be positive");
  if (s_max * t_step > kPi * (1.0 + 1e-12)) throw ParameterError("t_step violates the Nyquist bound s_max * t_step <= pi");
  if (!(t_max > t_min)) throw ParameterError("t grid must have t_max > t_min");
}

nlohmann::json FourierParams::to_json() const {
  return {{"s_max", s_max},
          {"num_s", num_s},
          {"s_min_exclusion", s_min_exclusion},
          {"window", window == Window::none ? "none" : "cosine_taper"},
          {"t_min", t_min},
          {"t_max", t_max},
          {"t_step", t_step}};
}

FourierParams FourierParams::automatic(const EigenSystem& a, const EigenSystem& apb) {
  double lo = 0.0, hi = 0.0;
  hull(a, apb, lo, hi);
  const double width = std::max(hi - lo, 1e-2);
  const double pad = 0.1 * width;
  const double period = 1.5 * (width + 2.0 * pad);
  const double ds = 2.0 * kPi / period;
  const double target = 4000.0 * std::max(1.0, 1.0 / width);
  int half = 1;
  while (half * ds < target) half *= 2;
  FourierParams p;
  p.num_s = 2 * half;
  p.s_max = half * ds;
  p.s_min_exclusion = 0.5 * ds;
  p.window = Window::cosine_taper;
  p.t_min = lo - pad;
  p.t_max = hi + pad;
  p.t_step = kPi / (2.0 * p.s_max);
  return p;
}

SSFGrid krein_ssf(const HermitianMatrix& a, const HermitianMatrix& b, std::optional<double> dt) {
  if (a.dim() != b.dim()) throw DimensionMismatch("A and B differ in dimension");
  const EigenSystem ea = eig_hermitian(a);
  const EigenSystem eab = eig_hermitian(a + b);
  double lo = 0.0, hi = 0.0;
  hull(ea, eab, lo, hi);

  std::vector<double> pts;
  for (Eigen::Index i = 0; i < ea.eigenvalues.size(); ++i) pts.push_back(ea.eigenvalues(i));
  for (Eigen::Index i = 0; i < eab.eigenvalues.size(); ++i) pts.push_back(eab.eigenvalues(i));
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());

  auto count_above = [](const Eigen::VectorXd& ev, double t) {
    int c = 0;
    for (Eigen::Index i = 0; i < ev.size(); ++i) c += ev(i) > t ? 1 : 0;
    return c;
  };
  auto level_at = [&](double t) { return count_above(eab.eigenvalues, t) - count_above(ea.eigenvalues, t); };

  SSFGrid g;
  g.order = 1;
  g.method = SSFGrid::Method::counting;
  // level on [pts[i-1], pts[i]) via the right-continuous count at the left end
  std::vector<int> lv{0};
  for (double p : pts) lv.push_back(level_at(p));
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (lv[i + 1] != lv[i]) {
      g.breakpoints.push_back(pts[i]);
      g.levels.push_back(lv[i]);
    }
  }
  g.levels.push_back(lv.back());
  if (g.levels.front() != 0 || g.levels.back() != 0) throw NumericalError("counting function does not vanish at infinity", 0.0);

  const double width = std::max(hi - lo, 1e-3);
  g.dt = dt.value_or(width / 4096.0);
  if (!(g.dt > 0.0)) throw ParameterError("grid step must be positive");
  const double pad = 2.0 * g.dt;
  g.support_lo = lo - pad;
  g.support_hi = hi + pad;
  g.t0 = g.support_lo;
  const auto count = static_cast<std::size_t>(std::ceil((g.support_hi - g.support_lo) / g.dt)) + 1;
  g.values.resize(count);
  for (std::size_t i = 0; i < count; ++i) g.values[i] = g.evaluate(g.t(i));
  g.l1_norm = trapezoid_abs(g.values, g.dt);
  g.params = {{"dt", g.dt}};
  return g;
}

SSFGrid higher_ssf_fourier(const HermitianMatrix& a, const HermitianMatrix& b, int n,
                           std::optional<FourierParams> params) {
  if (a.dim() != b.dim()) throw DimensionMismatch("A and B differ in dimension");
  if (n < 1) throw ParameterError("order must be >= 1");
  const FunctionFamily probe = families::fourier(1.0);
  if (n > probe.max_order()) {
    throw UnsupportedOrderError("order " + std::to_string(n) + " exceeds max_order of the exponential family");
  }
  const EigenSystem ea = eig_hermitian(a);
  const EigenSystem eab = eig_hermitian(a + b);
  const FourierParams prm = params.value_or(FourierParams::automatic(ea, eab));
  prm.validate();

  const int half = prm.num_s / 2;
  const double ds = prm.ds();
  const std::size_t ns = static_cast<std::size_t>(prm.num_s) + 1;
  auto s_at = [&](std::size_t j) { return (static_cast<double>(j) - half) * ds; };

  Matrix bn = Matrix::Identity(a.dim(), a.dim());
  for (int i = 0; i < n; ++i) bn = bn * b.matrix();
  const double anchor = bn.trace().real() / factorial(n);

  // eta_hat(s) = Tr(R_n(e^{is.})) / (is)^n
  std::vector<cplx> hat(ns);
  std::vector<char> excluded(ns, 0);
  parallel_for(ns, [&](std::size_t j) {
    const double s = s_at(j);
    if (std::abs(s) < prm.s_min_exclusion) {
      excluded[j] = 1;
      return;
    }
    const FunctionFamily f = families::fourier(s);
    const cplx tr = remainder_closed_form(f, eab, ea, b.matrix(), n).trace();
    hat[j] = tr / std::pow(cplx(0.0, s), n);
  });

  // fill the exclusion zone: real part even, imaginary part odd, anchored at s = 0
  {
    std::vector<std::size_t> fit;
    for (std::size_t j = 0; j < ns; ++j) {
      const double as = std::abs(s_at(j));
      if (!excluded[j] && as < prm.s_min_exclusion + 6.0 * ds) fit.push_back(j);
    }
    const double sc = prm.s_min_exclusion + 6.0 * ds;
    Eigen::MatrixXd me(static_cast<Eigen::Index>(fit.size()), 2), mo(static_cast<Eigen::Index>(fit.size()), 2);
    Eigen::VectorXd re(static_cast<Eigen::Index>(fit.size())), im(static_cast<Eigen::Index>(fit.size()));
    for (std::size_t r = 0; r < fit.size(); ++r) {
      const double x = s_at(fit[r]) / sc;
      const auto ri = static_cast<Eigen::Index>(r);
      me(ri, 0) = x * x;
      me(ri, 1) = x * x * x * x;
      mo(ri, 0) = x;
      mo(ri, 1) = x * x * x;
      re(ri) = hat[fit[r]].real() - anchor;
      im(ri) = hat[fit[r]].imag();
    }
    Eigen::Vector2d ce = Eigen::Vector2d::Zero(), co = Eigen::Vector2d::Zero();
    if (fit.size() >= 2) {
      ce = me.colPivHouseholderQr().solve(re);
      co = mo.colPivHouseholderQr().solve(im);
    }
    for (std::size_t j = 0; j < ns; ++j) {
      if (!excluded[j]) continue;
      const double x = s_at(j) / sc;
      hat[j] = cplx(anchor + ce(0) * x * x + ce(1) * x * x * x * x, co(0) * x + co(1) * x * x * x);
    }
  }

  // quadrature weights: trapezoid ends, optional cosine taper
  std::vector<cplx> w(ns);
  for (std::size_t j = 0; j < ns; ++j) {
    double wt = (j == 0 || j + 1 == ns) ? 0.5 : 1.0;
    if (prm.window == FourierParams::Window::cosine_taper) {
      wt *= 0.5 * (1.0 + std::cos(kPi * s_at(j) / prm.s_max));
    }
    w[j] = wt * ds / (2.0 * kPi) * hat[j];
  }

  SSFGrid g;
  g.order = n;
  g.method = SSFGrid::Method::fourier;
  g.t0 = prm.t_min;
  g.dt = prm.t_step;
  g.support_lo = prm.t_min;
  g.support_hi = prm.t_max;
  const auto count = static_cast<std::size_t>(std::floor((prm.t_max - prm.t_min) / prm.t_step)) + 1;
  g.values.resize(count);
  std::vector<double> imag(count);
  // eta(t) = sum_j w_j e^{-i s_j t}, phasor recurrence in j, refreshed every 256 steps
  parallel_for(count, [&](std::size_t k) {
    const double t = g.t(k);
    const cplx step = std::polar(1.0, -ds * t);
    cplx acc = 0.0;
    cplx ph;
    for (std::size_t j = 0; j < ns; ++j) {
      if (j % 256 == 0) ph = std::polar(1.0, -s_at(j) * t);
      acc += w[j] * ph;
      ph *= step;
    }
    g.values[k] = acc.real();
    imag[k] = acc.imag();
  });
  g.l1_norm = trapezoid_abs(g.values, g.dt);
  for (double v : imag) g.imag_residue = std::max(g.imag_residue, std::abs(v));
  g.params = prm.to_json();
  if (g.imag_residue > 1e-6 * std::max(g.l1_norm, 1e-300) && g.imag_residue > 1e-14) {
    throw InversionQualityError("imaginary residue " + std::to_string(g.imag_residue) +
                                " exceeds 1e-6 * l1_norm = " + std::to_string(1e-6 * g.l1_norm));
  }
  return g;
}

cplx pair_with_derivative(const SSFGrid& ssf, const FunctionFamily& f) {
  const int n = ssf.order;
  if (n > f.max_order()) throw UnsupportedOrderError("test function lacks derivative of order " + std::to_string(n));
  if (ssf.method == SSFGrid::Method::counting && n == 1 && !ssf.levels.empty()) {
    // integral of f' over each constant piece telescopes to endpoint values of f
    cplx acc = 0.0;
    for (std::size_t i = 1; i < ssf.breakpoints.size(); ++i) {
      acc += static_cast<double>(ssf.levels[i]) * (f.eval(0, ssf.breakpoints[i]) - f.eval(0, ssf.breakpoints[i - 1]));
    }
    return acc;
  }
  return trapezoid(ssf, [&](double t) { return f.eval(n, t); });
}

double ssf_moment(const SSFGrid& ssf, int k) {
  if (k < 0) throw ParameterError("moment order must be >= 0");
  if (ssf.method == SSFGrid::Method::counting && !ssf.levels.empty()) {
    double acc = 0.0;
    for (std::size_t i = 1; i < ssf.breakpoints.size(); ++i) {
      acc += ssf.levels[i] * (std::pow(ssf.breakpoints[i], k + 1) - std::pow(ssf.breakpoints[i - 1], k + 1)) / (k + 1);
    }
    return acc;
  }
  return trapezoid(ssf, [&](double t) { return std::pow(t, k); }).real();
}

double TraceFormulaReport::max_function_error() const {
  double m = 0.0;
  for (const auto& e : functions) m = std::max(m, e.relative_error);
  return m;
}

double TraceFormulaReport::max_moment_error() const {
  double m = 0.0;
  for (const auto& e : moments) m = std::max(m, e.error);
  return m;
}

nlohmann::json TraceFormulaReport::to_json() const {
  nlohmann::json fs = nlohmann::json::array();
  for (const auto& e : functions) {
    fs.push_back({{"function", e.function},
                  {"trace_remainder", {e.trace_remainder.real(), e.trace_remainder.imag()}},
                  {"pairing", {e.pairing.real(), e.pairing.imag()}},
                  {"relative_error", e.relative_error}});
  }
  nlohmann::json ms = nlohmann::json::array();
  for (const auto& e : moments) {
    ms.push_back({{"k", e.k}, {"moment", e.moment}, {"expected", e.expected}, {"error", e.error}});
  }
  return {{"functions", fs}, {"moments", ms}};
}

TraceFormulaReport verify_trace_formula(const HermitianMatrix& a, const HermitianMatrix& b, int n,
                                        const SSFGrid& ssf, const std::vector<FunctionFamily>& test_functions) {
  if (ssf.order != n) throw ContractViolation("spectral shift grid has a different order");
  TraceFormulaReport rep;
  for (const auto& f : test_functions) {
    TraceFormulaEntry e;
    e.function = f.to_json().dump();
    e.trace_remainder = taylor_remainder(f, a, b, n).value.trace();
    e.pairing = pair_with_derivative(ssf, f);
    e.relative_error = std::abs(e.trace_remainder - e.pairing) / std::max(1.0, std::abs(e.trace_remainder));
    rep.functions.push_back(e);
  }
  for (int k = 0; k <= 2; ++k) {
    MomentEntry m;
    m.k = k;
    m.moment = ssf_moment(ssf, k);
    const FunctionFamily mono = families::monomial(n + k);
    m.expected = factorial(k) / factorial(n + k) * taylor_remainder(mono, a, b, n).value.trace().real();
    m.error = std::abs(m.moment - m.expected) / (1.0 + std::abs(m.expected));
    rep.moments.push_back(m);
  }
  return rep;
}

nlohmann::json DiagonalSymbolReport::to_json() const {
  nlohmann::json j{{"restricted", {restricted.real(), restricted.imag()}},
                   {"full", {full.real(), full.imag()}},
                   {"identity_error", identity_error}};
  if (pairing) j["pairing"] = {pairing->real(), pairing->imag()};
  if (pairing_error) j["pairing_error"] = *pairing_error;
  return j;
}

DiagonalSymbolReport diagonal_symbol_trace(const HermitianMatrix& a, const HermitianMatrix& b, int n,
                                           const FunctionFamily& f, const SSFGrid* ssf) {
  if (a.dim() != b.dim()) throw DimensionMismatch("A and B differ in dimension");
  if (n < 2) throw ParameterError("the restricted-symbol trace identity needs n >= 2");
  if (n > f.max_order()) throw UnsupportedOrderError("order exceeds max_order of '" + f.id() + "'");
  const EigenSystem ea = eig_hermitian(a);
  const EigenSystem eab = eig_hermitian(a + b);
  std::vector<EigenSystem> ops{ea, eab};
  for (int i = 2; i < n; ++i) ops.push_back(ea);

  const Symbol full_symbol = Symbol::divided_difference(f, n);
  DiagonalSymbolReport rep;
  {
    MOIOperands o;
    o.operators = ops;
    o.arguments.assign(static_cast<std::size_t>(n - 1), b.matrix());
    rep.restricted = moi_trace(Symbol::diagonal_restricted(full_symbol), o, b.matrix());
  }
  {
    MOIOperands o;
    o.operators = ops;
    o.operators.push_back(ea);
    o.arguments.assign(static_cast<std::size_t>(n), b.matrix());
    rep.full = moi_projection_sum(full_symbol, o).value.trace();
  }
  const double scale = std::max(std::abs(rep.full), std::abs(rep.restricted));
  rep.identity_error = scale == 0.0 ? 0.0 : std::abs(rep.full - rep.restricted) / scale;
  if (rep.identity_error > 1e-9) {
    throw ConsistencyError("restricted-symbol trace differs from the full-symbol trace", std::abs(rep.restricted),
                           std::abs(rep.full), rep.identity_error);
  }
  if (ssf) {
    if (ssf->order != n) throw ContractViolation("spectral shift grid has a different order");
    rep.pairing = pair_with_derivative(*ssf, f);
    rep.pairing_error = std::abs(rep.full - *rep.pairing) / std::max(1.0, std::abs(rep.full));
  }
  return rep;
}

nlohmann::json L1Report::to_json() const {
  return {{"l1_norm", l1_norm}, {"b_norm_power", b_norm_power}, {"ratio", ratio}};
}

L1Report ssf_l1_report(const HermitianMatrix& b, int n, const SSFGrid& ssf) {
  if (ssf.order != n) throw ContractViolation("spectral shift grid has a different order");
  L1Report r;
  r.l1_norm = ssf.l1_norm;
  r.b_norm_power = std::pow(schatten_norm(b.matrix(), n), n);
  r.ratio = r.b_norm_power == 0.0 ? 0.0 : r.l1_norm / r.b_norm_power;
  return r;
}

double ssf_l1_distance(const SSFGrid& x, const SSFGrid& y) {
  if (x.size() < 2) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double w = (i == 0 || i + 1 == x.size()) ? 0.5 : 1.0;
    acc += w * std::abs(x.values[i] - y.evaluate(x.t(i)));
  }
  return acc * x.dt;
}

}  // namespace moilab
