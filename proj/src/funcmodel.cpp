#include "moilab/funcmodel.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>

#include "moilab/error.hpp"

namespace moilab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<bool> fill_flags(int max_order, auto&& pred) {
  std::vector<bool> v(static_cast<std::size_t>(max_order) + 1);
  for (int k = 0; k <= max_order; ++k) v[static_cast<std::size_t>(k)] = pred(k);
  return v;
}

bool flag_at(const std::vector<bool>& v, int k) {
  return k >= 0 && static_cast<std::size_t>(k) < v.size() && v[static_cast<std::size_t>(k)];
}

double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

double factorial(int n) {
  double r = 1.0;
  for (int i = 2; i <= n; ++i) r *= i;
  return r;
}

}  // namespace

struct FunctionFamily::Impl {
  std::string id;
  int max_order = 0;
  Evaluator evaluator;
  FamilyFlags flags;
  Options options;

  mutable std::mutex sup_mutex;
  mutable std::vector<double> sup_cache;

  double sampled_sup(int k) const {
    const int n_grid = 20001;
    const double lo = options.sample_lo;
    const double hi = options.sample_hi;
    const double h = (hi - lo) / (n_grid - 1);
    std::vector<cplx> d(static_cast<std::size_t>(k) + 1);
    auto mag = [&](double x) {
      evaluator(x, k, d);
      return std::abs(d[static_cast<std::size_t>(k)]);
    };
    double best = 0.0;
    double best_x = lo;
    for (int i = 0; i < n_grid; ++i) {
      const double x = lo + i * h;
      const double v = mag(x);
      if (v > best) {
        best = v;
        best_x = x;
      }
    }
    // golden-section refinement around the best grid point
    double a = std::max(lo, best_x - h);
    double b = std::min(hi, best_x + h);
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    for (int it = 0; it < 60; ++it) {
      const double x1 = b - g * (b - a);
      const double x2 = a + g * (b - a);
      if (mag(x1) > mag(x2)) {
        b = x2;
      } else {
        a = x1;
      }
    }
    return std::max(best, mag(0.5 * (a + b)));
  }
};

FunctionFamily::FunctionFamily(std::string id, int max_order, Evaluator evaluator,
                               FamilyFlags flags, Options options) {
  if (max_order < 0) throw ParameterError("max_order must be non-negative");
  auto impl = std::make_shared<Impl>();
  impl->id = std::move(id);
  impl->max_order = max_order;
  impl->evaluator = std::move(evaluator);
  impl->flags = std::move(flags);
  impl->options = std::move(options);
  impl->sup_cache.assign(static_cast<std::size_t>(max_order) + 1, kNaN);
  for (std::size_t k = 0; k < impl->options.sup_abs.size() && k < impl->sup_cache.size(); ++k) {
    impl->sup_cache[k] = impl->options.sup_abs[k];
  }
  impl_ = std::move(impl);
}

const std::string& FunctionFamily::id() const noexcept { return impl_->id; }
int FunctionFamily::max_order() const noexcept { return impl_->max_order; }
const FamilyFlags& FunctionFamily::flags() const noexcept { return impl_->flags; }
const Domain& FunctionFamily::domain() const noexcept { return impl_->options.domain; }
double FunctionFamily::taylor_scale() const noexcept { return impl_->options.taylor_scale; }

nlohmann::json FunctionFamily::to_json() const {
  nlohmann::json j = impl_->options.params;
  j["id"] = impl_->id;
  return j;
}

void FunctionFamily::derivatives(double x, int upto, std::span<cplx> out) const {
  if (upto < 0 || upto > impl_->max_order) {
    throw UnsupportedOrderError("family '" + impl_->id + "' provides derivatives up to order " +
                                std::to_string(impl_->max_order) + ", requested " +
                                std::to_string(upto));
  }
  if (!impl_->options.domain.contains(x)) {
    throw DomainError("point " + std::to_string(x) + " outside the domain of '" + impl_->id + "'");
  }
  if (out.size() < static_cast<std::size_t>(upto) + 1) {
    throw ContractViolation("derivative output buffer too small");
  }
  impl_->evaluator(x, upto, out);
}

cplx FunctionFamily::eval(int k, double x) const {
  std::vector<cplx> d(static_cast<std::size_t>(std::max(k, 0)) + 1);
  derivatives(x, k, d);
  return d[static_cast<std::size_t>(k)];
}

bool FunctionFamily::bounded_deriv(int k) const noexcept {
  return flag_at(impl_->flags.bounded_deriv, k);
}
bool FunctionFamily::vanishes_at_inf(int k) const noexcept {
  return flag_at(impl_->flags.vanishes_at_inf, k);
}
bool FunctionFamily::declared_w_class(int n) const noexcept {
  return flag_at(impl_->flags.w_class, n);
}
bool FunctionFamily::declared_q_class(int n) const noexcept {
  return flag_at(impl_->flags.q_class, n);
}

double FunctionFamily::sup_abs(int k) const {
  if (k < 0 || k > impl_->max_order) {
    throw UnsupportedOrderError("sup_abs order out of range for '" + impl_->id + "'");
  }
  if (!bounded_deriv(k)) return kInf;
  std::lock_guard<std::mutex> lock(impl_->sup_mutex);
  double& slot = impl_->sup_cache[static_cast<std::size_t>(k)];
  if (std::isnan(slot)) slot = impl_->sampled_sup(k);
  return slot;
}

namespace families {

namespace {

void polynomial_flags(int degree, int max_order, FamilyFlags& flags) {
  flags.bounded_deriv = fill_flags(max_order, [&](int j) { return j >= degree; });
  flags.vanishes_at_inf = fill_flags(max_order, [&](int j) { return j > degree; });
  flags.q_class = fill_flags(max_order, [&](int n) {
    return n >= 1 && degree <= n && (degree <= 1 || n == 1);
  });
  flags.w_class = fill_flags(max_order, [&](int n) { return n >= 1 && degree < n && degree <= 1; });
}

}  // namespace

FunctionFamily monomial(int k) {
  if (k < 0) throw ParameterError("monomial degree must be non-negative");
  const int max_order = std::max(k, 12);
  FamilyFlags flags;
  polynomial_flags(k, max_order, flags);
  FunctionFamily::Options opt;
  opt.taylor_scale = kInf;
  opt.sup_abs = std::vector<double>(static_cast<std::size_t>(max_order) + 1, kInf);
  for (int j = k; j <= max_order; ++j) opt.sup_abs[static_cast<std::size_t>(j)] = j == k ? factorial(k) : 0.0;
  opt.params = {{"k", k}};
  auto eval = [k](double x, int upto, std::span<cplx> out) {
    for (int j = 0; j <= upto; ++j) {
      if (j > k) {
        out[static_cast<std::size_t>(j)] = 0.0;
        continue;
      }
      double c = 1.0;
      for (int i = 0; i < j; ++i) c *= (k - i);
      out[static_cast<std::size_t>(j)] = c * std::pow(x, k - j);
    }
  };
  return FunctionFamily("monomial", max_order, eval, std::move(flags), std::move(opt));
}

FunctionFamily affine(double c0, double c1) {
  const int degree = c1 != 0.0 ? 1 : 0;
  const int max_order = 12;
  FamilyFlags flags;
  polynomial_flags(degree, max_order, flags);
  if (c0 == 0.0 && c1 == 0.0) flags.bounded_deriv[0] = true;
  FunctionFamily::Options opt;
  opt.taylor_scale = kInf;
  opt.sup_abs = std::vector<double>(static_cast<std::size_t>(max_order) + 1, 0.0);
  opt.sup_abs[0] = degree == 0 ? std::abs(c0) : kInf;
  opt.sup_abs[1] = std::abs(c1);
  opt.params = {{"c0", c0}, {"c1", c1}};
  auto eval = [c0, c1](double x, int upto, std::span<cplx> out) {
    for (int j = 0; j <= upto; ++j) out[static_cast<std::size_t>(j)] = 0.0;
    out[0] = c0 + c1 * x;
    if (upto >= 1) out[1] = c1;
  };
  return FunctionFamily("affine", max_order, eval, std::move(flags), std::move(opt));
}

FunctionFamily exponential() {
  const int max_order = 12;
  FamilyFlags flags;
  flags.bounded_deriv = fill_flags(max_order, [](int) { return false; });
  flags.vanishes_at_inf = fill_flags(max_order, [](int) { return false; });
  flags.w_class = fill_flags(max_order, [](int) { return false; });
  flags.q_class = fill_flags(max_order, [](int) { return false; });
  FunctionFamily::Options opt;
  auto eval = [](double x, int upto, std::span<cplx> out) {
    const double e = std::exp(x);
    for (int j = 0; j <= upto; ++j) out[static_cast<std::size_t>(j)] = e;
  };
  return FunctionFamily("exp", max_order, eval, std::move(flags), std::move(opt));
}

FunctionFamily fourier(double s) {
  if (!std::isfinite(s)) throw ParameterError("fourier frequency must be finite");
  const int max_order = 16;
  FamilyFlags flags;
  flags.real_valued = s == 0.0;
  flags.bounded_deriv = fill_flags(max_order, [](int) { return true; });
  flags.vanishes_at_inf = fill_flags(max_order, [s](int j) { return j >= 1 && s == 0.0; });
  flags.w_class = fill_flags(max_order, [s](int n) { return n >= 1 && s == 0.0; });
  flags.q_class = fill_flags(max_order, [](int n) { return n >= 1; });
  FunctionFamily::Options opt;
  opt.taylor_scale = s == 0.0 ? kInf : 1.0 / std::abs(s);
  opt.sup_abs.resize(static_cast<std::size_t>(max_order) + 1);
  for (int j = 0; j <= max_order; ++j) opt.sup_abs[static_cast<std::size_t>(j)] = std::pow(std::abs(s), j);
  opt.params = {{"s", s}};
  auto eval = [s](double x, int upto, std::span<cplx> out) {
    cplx v = std::polar(1.0, s * x);
    const cplx is(0.0, s);
    for (int j = 0; j <= upto; ++j) {
      out[static_cast<std::size_t>(j)] = v;
      v *= is;
    }
  };
  return FunctionFamily("fourier", max_order, eval, std::move(flags), std::move(opt));
}

FunctionFamily gaussian() {
  const int max_order = 12;
  FamilyFlags flags;
  flags.bounded_deriv = fill_flags(max_order, [](int) { return true; });
  flags.vanishes_at_inf = fill_flags(max_order, [](int) { return true; });
  flags.w_class = fill_flags(max_order, [](int n) { return n >= 1; });
  flags.q_class = fill_flags(max_order, [](int n) { return n >= 1; });
  FunctionFamily::Options opt;
  opt.sample_lo = -8.0;
  opt.sample_hi = 8.0;
  // d^k/dx^k exp(-x^2) = (-1)^k H_k(x) exp(-x^2), physicists' Hermite H_k
  auto eval = [](double x, int upto, std::span<cplx> out) {
    const double g = std::exp(-x * x);
    double h_prev = 0.0;
    double h = 1.0;
    for (int k = 0; k <= upto; ++k) {
      out[static_cast<std::size_t>(k)] = ((k % 2) ? -h : h) * g;
      const double h_next = 2.0 * x * h - 2.0 * k * h_prev;
      h_prev = h;
      h = h_next;
    }
  };
  return FunctionFamily("gaussian", max_order, eval, std::move(flags), std::move(opt));
}

FunctionFamily bump(double center, double radius) {
  if (!(radius > 0.0)) throw ParameterError("bump radius must be positive");
  const int max_order = 12;
  FamilyFlags flags;
  flags.compact_support = true;
  flags.bounded_deriv = fill_flags(max_order, [](int) { return true; });
  flags.vanishes_at_inf = fill_flags(max_order, [](int) { return true; });
  flags.w_class = fill_flags(max_order, [](int n) { return n >= 1; });
  flags.q_class = fill_flags(max_order, [](int n) { return n >= 1; });
  FunctionFamily::Options opt;
  opt.taylor_scale = 0.05 * radius;
  opt.sample_lo = center - radius;
  opt.sample_hi = center + radius;
  opt.params = {{"center", center}, {"radius", radius}};
  // F(u) = exp(g(u)), g(u) = -1/(1-u^2); F^(k) = sum_j C(k-1,j) g^(j+1) F^(k-1-j)
  auto eval = [center, radius](double x, int upto, std::span<cplx> out) {
    const double u = (x - center) / radius;
    for (int k = 0; k <= upto; ++k) out[static_cast<std::size_t>(k)] = 0.0;
    if (std::abs(u) >= 1.0) return;
    const double F0 = std::exp(-1.0 / (1.0 - u * u));
    if (F0 == 0.0) return;
    std::vector<double> g(static_cast<std::size_t>(upto) + 1);
    double fact = 1.0;
    for (int m = 0; m <= upto; ++m) {
      if (m > 0) fact *= m;
      const double sign = (m % 2) ? -1.0 : 1.0;
      g[static_cast<std::size_t>(m)] =
          -0.5 * (fact / std::pow(1.0 - u, m + 1) + sign * fact / std::pow(1.0 + u, m + 1));
    }
    std::vector<double> F(static_cast<std::size_t>(upto) + 1);
    F[0] = F0;
    for (int k = 1; k <= upto; ++k) {
      double acc = 0.0;
      for (int j = 0; j <= k - 1; ++j) {
        acc += binomial(k - 1, j) * g[static_cast<std::size_t>(j) + 1] *
               F[static_cast<std::size_t>(k - 1 - j)];
      }
      F[static_cast<std::size_t>(k)] = acc;
    }
    double scale = 1.0;
    for (int k = 0; k <= upto; ++k) {
      out[static_cast<std::size_t>(k)] = F[static_cast<std::size_t>(k)] * scale;
      scale /= radius;
    }
  };
  return FunctionFamily("bump", max_order, eval, std::move(flags), std::move(opt));
}

FunctionFamily rational() {
  const int max_order = 12;
  FamilyFlags flags;
  flags.bounded_deriv = fill_flags(max_order, [](int) { return true; });
  flags.vanishes_at_inf = fill_flags(max_order, [](int) { return true; });
  flags.w_class = fill_flags(max_order, [](int n) { return n >= 1; });
  flags.q_class = fill_flags(max_order, [](int n) { return n >= 1; });
  FunctionFamily::Options opt;
  opt.sample_lo = -10.0;
  opt.sample_hi = 10.0;
  // 1/(1+x^2) = Im 1/(x-i); f^(k) = (-1)^k k! Im (x-i)^{-k-1}
  auto eval = [](double x, int upto, std::span<cplx> out) {
    const cplx w = 1.0 / cplx(x, -1.0);
    cplx p = w;
    double c = 1.0;
    for (int k = 0; k <= upto; ++k) {
      if (k > 0) c *= -k;
      out[static_cast<std::size_t>(k)] = c * p.imag();
      p *= w;
    }
  };
  return FunctionFamily("rational", max_order, eval, std::move(flags), std::move(opt));
}

FunctionFamily counterexample() {
  const int max_order = 2;
  FamilyFlags flags;
  flags.bounded_deriv = {false, true, true};
  flags.vanishes_at_inf = {false, false, true};
  flags.w_class = {false, false, false};
  flags.q_class = {false, false, false};
  FunctionFamily::Options opt;
  opt.sup_abs = {kInf, 1.0 + std::numbers::pi, 2.0};
  auto eval = [](double x, int upto, std::span<cplx> out) {
    double v[3];
    if (x >= 0.0) {
      const double r = 1.0 / (1.0 + x);
      v[0] = r;
      v[1] = -r * r;
      v[2] = 2.0 * r * r * r;
    } else {
      const double at = std::atan(x);
      v[0] = 1.0 - x + 2.0 * (x * at - 0.5 * std::log1p(x * x));
      v[1] = -1.0 + 2.0 * at;
      v[2] = 2.0 / (1.0 + x * x);
    }
    for (int k = 0; k <= upto; ++k) out[static_cast<std::size_t>(k)] = v[k];
  };
  return FunctionFamily("counterexample", max_order, eval, std::move(flags), std::move(opt));
}

FunctionFamily linear_combination(const std::vector<std::pair<cplx, FunctionFamily>>& terms) {
  if (terms.empty()) throw ParameterError("linear combination needs at least one term");
  int max_order = terms.front().second.max_order();
  double scale = kInf;
  bool real = true;
  for (const auto& [c, f] : terms) {
    max_order = std::min(max_order, f.max_order());
    scale = std::min(scale, f.taylor_scale());
    real = real && f.flags().real_valued && c.imag() == 0.0;
  }
  FamilyFlags flags;
  flags.real_valued = real;
  auto all = [&](auto pred) {
    return fill_flags(max_order, [&](int k) {
      return std::all_of(terms.begin(), terms.end(), [&](const auto& t) { return pred(t.second, k); });
    });
  };
  flags.bounded_deriv = all([](const FunctionFamily& f, int k) { return f.bounded_deriv(k); });
  flags.vanishes_at_inf = all([](const FunctionFamily& f, int k) { return f.vanishes_at_inf(k); });
  flags.w_class = all([](const FunctionFamily& f, int k) { return f.declared_w_class(k); });
  flags.q_class = all([](const FunctionFamily& f, int k) { return f.declared_q_class(k); });
  flags.compact_support = std::all_of(terms.begin(), terms.end(),
                                      [](const auto& t) { return t.second.flags().compact_support; });
  FunctionFamily::Options opt;
  opt.taylor_scale = scale;
  nlohmann::json parts = nlohmann::json::array();
  for (const auto& [c, f] : terms) parts.push_back({{"re", c.real()}, {"im", c.imag()}, {"f", f.to_json()}});
  opt.params = {{"terms", parts}};
  auto eval = [terms](double x, int upto, std::span<cplx> out) {
    std::vector<cplx> tmp(static_cast<std::size_t>(upto) + 1);
    for (int k = 0; k <= upto; ++k) out[static_cast<std::size_t>(k)] = 0.0;
    for (const auto& [c, f] : terms) {
      f.derivatives(x, upto, tmp);
      for (int k = 0; k <= upto; ++k) out[static_cast<std::size_t>(k)] += c * tmp[static_cast<std::size_t>(k)];
    }
  };
  return FunctionFamily("combination", max_order, eval, std::move(flags), std::move(opt));
}

FunctionFamily product(const FunctionFamily& f, const FunctionFamily& g) {
  const int max_order = std::min(f.max_order(), g.max_order());
  FamilyFlags flags;
  flags.real_valued = f.flags().real_valued && g.flags().real_valued;
  flags.compact_support = f.flags().compact_support || g.flags().compact_support;
  flags.bounded_deriv = fill_flags(max_order, [&](int k) {
    for (int j = 0; j <= k; ++j) {
      if (!f.bounded_deriv(j) || !g.bounded_deriv(j)) return false;
    }
    return true;
  });
  flags.vanishes_at_inf = fill_flags(max_order, [&](int k) {
    return flags.compact_support && flags.bounded_deriv[static_cast<std::size_t>(k)];
  });
  flags.w_class = fill_flags(max_order, [](int) { return false; });
  flags.q_class = fill_flags(max_order, [](int) { return false; });
  FunctionFamily::Options opt;
  opt.taylor_scale = std::min(f.taylor_scale(), g.taylor_scale());
  opt.sample_lo = std::max(-20.0, std::min(f.domain().lo, g.domain().lo));
  opt.params = {{"factors", nlohmann::json::array({f.to_json(), g.to_json()})}};
  if (max_order == 0) {
    opt.sup_abs = {f.sup_abs(0) * g.sup_abs(0)};
  }
  auto eval = [f, g](double x, int upto, std::span<cplx> out) {
    std::vector<cplx> a(static_cast<std::size_t>(upto) + 1);
    std::vector<cplx> b(static_cast<std::size_t>(upto) + 1);
    f.derivatives(x, upto, a);
    g.derivatives(x, upto, b);
    for (int k = 0; k <= upto; ++k) {
      cplx acc = 0.0;
      for (int j = 0; j <= k; ++j) {
        acc += binomial(k, j) * a[static_cast<std::size_t>(j)] * b[static_cast<std::size_t>(k - j)];
      }
      out[static_cast<std::size_t>(k)] = acc;
    }
  };
  return FunctionFamily("product", max_order, eval, std::move(flags), std::move(opt));
}

FunctionFamily scalar(std::string id, std::function<cplx(double)> fn, double sup_abs,
                      bool real_valued) {
  FamilyFlags flags;
  flags.real_valued = real_valued;
  flags.bounded_deriv = {std::isfinite(sup_abs)};
  flags.vanishes_at_inf = {false};
  flags.w_class = {false};
  flags.q_class = {false};
  FunctionFamily::Options opt;
  opt.sup_abs = {sup_abs};
  auto eval = [fn = std::move(fn)](double x, int, std::span<cplx> out) { out[0] = fn(x); };
  return FunctionFamily(std::move(id), 0, eval, std::move(flags), std::move(opt));
}

}  // namespace families

FunctionFamily family_from_json(const nlohmann::json& spec) {
  if (spec.is_string()) return family_from_json(nlohmann::json{{"id", spec}});
  if (!spec.is_object() || !spec.contains("id")) {
    throw ConfigError("function spec must be an object with an \"id\" field");
  }
  const std::string id = spec.at("id").get<std::string>();
  try {
    if (id == "monomial") return families::monomial(spec.value("k", 1));
    if (id == "affine") return families::affine(spec.value("c0", 0.0), spec.value("c1", 1.0));
    if (id == "exp") return families::exponential();
    if (id == "fourier") return families::fourier(spec.value("s", 1.0));
    if (id == "gaussian") return families::gaussian();
    if (id == "bump") return families::bump(spec.value("center", 0.0), spec.value("radius", 1.0));
    if (id == "rational") return families::rational();
    if (id == "counterexample") return families::counterexample();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("bad parameters for function '" + id + "': " + e.what());
  }
  throw ConfigError("unknown function id '" + id + "'");
}

AdmissibilityReport classify(const FunctionFamily& f, int n) {
  AdmissibilityReport r;
  r.order = n;
  if (n < 1 || n > f.max_order()) {
    r.notes.push_back("order outside 1..max_order; nothing certified");
    r.density_path_only = true;
    return r;
  }
  bool bounded_below_n = true;
  for (int k = 1; k <= n - 1; ++k) bounded_below_n = bounded_below_n && f.bounded_deriv(k);
  r.derivative_formula = bounded_below_n && f.bounded_deriv(n);
  r.c0_path = f.vanishes_at_inf(n);
  r.trace_formula_tau = f.declared_w_class(n) && r.c0_path && bounded_below_n;
  r.trace_formula_tr = f.declared_q_class(n) && bounded_below_n && f.bounded_deriv(n);
  r.density_path_only = !r.trace_formula_tau && !r.trace_formula_tr;
  if (!r.derivative_formula) r.notes.push_back("some of f', ..., f^(n) unbounded");
  if (!r.c0_path) r.notes.push_back("f^(n) does not vanish at infinity");
  if (r.density_path_only) r.notes.push_back("trace formula reachable only by approximation");
  return r;
}

}  // namespace moilab
