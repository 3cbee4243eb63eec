#include "moilab/taylor.hpp"

#include <cmath>
#include <sstream>

#include "moilab/error.hpp"
#include "moilab/parallel.hpp"

namespace moilab {

namespace {

Matrix dd_moi(const FunctionFamily& f, int n, std::vector<EigenSystem> ops, std::vector<Matrix> args) {
  MOIOperands o;
  o.operators = std::move(ops);
  o.arguments = std::move(args);
  return moi_projection_sum(Symbol::divided_difference(f, n), o).value;
}

std::vector<EigenSystem> repeat(const EigenSystem& e, int count) {
  return std::vector<EigenSystem>(static_cast<std::size_t>(count), e);
}

double frob(const Matrix& m) { return m.norm(); }

double factorial(int n) {
  double r = 1.0;
  for (int i = 2; i <= n; ++i) r *= i;
  return r;
}

double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

void check_dims(const HermitianMatrix& a, const HermitianMatrix& b) {
  if (a.dim() != b.dim()) throw DimensionMismatch("A and B differ in dimension");
}

}  // namespace

DerivativeResult gateaux_derivative(const FunctionFamily& f, const HermitianMatrix& a,
                                    const HermitianMatrix& b, int k, double t) {
  check_dims(a, b);
  if (k < 1) throw ParameterError("derivative order must be >= 1");
  if (k > f.max_order()) {
    throw UnsupportedOrderError("derivative order " + std::to_string(k) + " exceeds max_order of '" + f.id() + "'");
  }
  DerivativeResult r;
  for (int j = 1; j <= k; ++j) {
    if (!f.bounded_deriv(j)) {
      r.warnings.push_back("'" + f.id() + "': derivative of order " + std::to_string(j) +
                           " is not declared bounded; formula certified only at finite dimension");
    }
  }
  const EigenSystem e = eig_hermitian(a + b * t);
  r.value = factorial(k) * dd_moi(f, k, repeat(e, k + 1),
                                  std::vector<Matrix>(static_cast<std::size_t>(k), b.matrix()));
  return r;
}

double default_fd_step(const HermitianMatrix& b) {
  return 5e-2 / (1.0 + schatten_norm(b.matrix(), std::numeric_limits<double>::infinity()));
}

Matrix finite_difference_oracle(const FunctionFamily& f, const HermitianMatrix& a,
                                const HermitianMatrix& b, int k, double t, double h, int levels) {
  check_dims(a, b);
  if (!(h > 0.0)) throw ParameterError("finite-difference step must be positive");
  if (k < 1) throw ParameterError("finite-difference order must be >= 1");
  if (levels < 0) throw ParameterError("levels must be >= 0");
  auto value_at = [&](double s) { return apply_function(f, eig_hermitian(a + b * s)); };
  auto central = [&](double step) {
    Matrix acc = Matrix::Zero(a.dim(), a.dim());
    for (int i = 0; i <= k; ++i) {
      const double sign = (i % 2 == 0) ? 1.0 : -1.0;
      acc += sign * binomial(k, i) * value_at(t + (0.5 * k - i) * step);
    }
    return Matrix(acc / std::pow(step, k));
  };
  std::vector<Matrix> table;
  for (int l = 0; l <= levels; ++l) table.push_back(central(h / std::pow(2.0, l)));
  for (int j = 1; j <= levels; ++j) {
    const double w = std::pow(4.0, j);
    for (std::size_t l = 0; l + static_cast<std::size_t>(j) <= static_cast<std::size_t>(levels); ++l) {
      table[l] = (w * table[l + 1] - table[l]) / (w - 1.0);
    }
  }
  return table.front();
}

Matrix remainder_closed_form(const FunctionFamily& f, const EigenSystem& apb, const EigenSystem& a,
                             const Matrix& b, int n) {
  std::vector<EigenSystem> ops{apb};
  for (int i = 0; i < n; ++i) ops.push_back(a);
  return dd_moi(f, n, std::move(ops), std::vector<Matrix>(static_cast<std::size_t>(n), b));
}

RemainderResult taylor_remainder(const FunctionFamily& f, const HermitianMatrix& a,
                                 const HermitianMatrix& b, int n, double tol) {
  check_dims(a, b);
  if (n < 1) throw ParameterError("remainder order must be >= 1");
  if (n > f.max_order()) {
    throw UnsupportedOrderError("remainder order " + std::to_string(n) + " exceeds max_order of '" + f.id() + "'");
  }
  const EigenSystem ea = eig_hermitian(a);
  const EigenSystem eab = eig_hermitian(a + b);
  RemainderResult r;
  r.sum_form = apply_function(f, eab) - apply_function(f, ea);
  for (int k = 1; k < n; ++k) {
    r.sum_form -= dd_moi(f, k, repeat(ea, k + 1), std::vector<Matrix>(static_cast<std::size_t>(k), b.matrix()));
  }
  r.value = remainder_closed_form(f, eab, ea, b.matrix(), n);
  r.relative_difference = frob(r.value - r.sum_form) / std::max(1.0, frob(r.value));
  if (!(r.relative_difference <= tol)) {
    throw ConsistencyError("Taylor remainder: sum form and closed form disagree", frob(r.sum_form),
                           frob(r.value), r.relative_difference);
  }
  return r;
}

double perturbation_first_order(const FunctionFamily& f, const HermitianMatrix& a,
                                const HermitianMatrix& b, double tol) {
  check_dims(a, b);
  const EigenSystem ea = eig_hermitian(a);
  const EigenSystem eb = eig_hermitian(b);
  const Matrix lhs = dd_moi(f, 1, {ea, eb}, {(a - b).matrix()});
  const Matrix rhs = apply_function(f, ea) - apply_function(f, eb);
  const double res = frob(lhs - rhs) / std::max(1.0, frob(rhs));
  if (!(res <= tol)) {
    throw ConsistencyError("first-order perturbation identity violated", frob(lhs), frob(rhs), res);
  }
  return res;
}

double perturbation_higher_order(const FunctionFamily& f, const HermitianMatrix& a,
                                 const HermitianMatrix& b, const std::vector<HermitianMatrix>& others,
                                 const std::vector<Matrix>& x, int j, double tol) {
  check_dims(a, b);
  const int k = static_cast<int>(x.size());
  if (k < 1) throw ParameterError("need at least one argument");
  if (static_cast<int>(others.size()) != k) {
    throw ContractViolation("need k fixed operators for k arguments");
  }
  if (j < 1 || j > k + 1) throw ParameterError("slot j must lie in 1..k+1");
  if (k + 1 > f.max_order()) {
    throw UnsupportedOrderError("identity needs order k+1 <= max_order of '" + f.id() + "'");
  }
  std::vector<EigenSystem> fixed;
  for (const auto& o : others) {
    if (o.dim() != a.dim()) throw DimensionMismatch("operator dimension mismatch");
    fixed.push_back(eig_hermitian(o));
  }
  const EigenSystem ea = eig_hermitian(a);
  const EigenSystem eb = eig_hermitian(b);
  const auto js = static_cast<std::size_t>(j - 1);

  auto with = [&](std::initializer_list<const EigenSystem*> inserted) {
    std::vector<EigenSystem> ops(fixed.begin(), fixed.begin() + static_cast<std::ptrdiff_t>(js));
    for (const EigenSystem* e : inserted) ops.push_back(*e);
    ops.insert(ops.end(), fixed.begin() + static_cast<std::ptrdiff_t>(js), fixed.end());
    return ops;
  };
  const Matrix lhs = dd_moi(f, k, with({&eb}), x) - dd_moi(f, k, with({&ea}), x);
  std::vector<Matrix> args(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(js));
  args.push_back((b - a).matrix());
  args.insert(args.end(), x.begin() + static_cast<std::ptrdiff_t>(js), x.end());
  const Matrix rhs = dd_moi(f, k + 1, with({&eb, &ea}), args);
  const double res = frob(lhs - rhs) / std::max(1.0, frob(rhs));
  if (!(res <= tol)) {
    throw ConsistencyError("operator replacement identity violated", frob(lhs), frob(rhs), res);
  }
  return res;
}

double telescoping_check(const FunctionFamily& f, const HermitianMatrix& a, const HermitianMatrix& b,
                         int n, double t, int j, double tol) {
  check_dims(a, b);
  if (n < 1 || n > f.max_order()) throw UnsupportedOrderError("order n must lie in 1..max_order");
  if (j < 1 || j > n) throw ParameterError("j must lie in 1..n");
  const EigenSystem ea = eig_hermitian(a);
  const EigenSystem et = eig_hermitian(a + b * t);
  auto mixed = [&](int lead, int total) {
    std::vector<EigenSystem> ops = repeat(et, lead);
    for (int i = lead; i < total; ++i) ops.push_back(ea);
    return ops;
  };
  const auto bs = [&](int count) { return std::vector<Matrix>(static_cast<std::size_t>(count), b.matrix()); };
  const Matrix lhs = dd_moi(f, n - 1, mixed(j, n), bs(n - 1)) - dd_moi(f, n - 1, mixed(0, n), bs(n - 1));
  Matrix rhs = Matrix::Zero(a.dim(), a.dim());
  for (int l = 1; l <= j; ++l) rhs += dd_moi(f, n, mixed(l, n + 1), bs(n));
  rhs *= t;
  const double res = frob(lhs - rhs) / std::max(1.0, frob(rhs));
  if (!(res <= tol)) {
    throw ConsistencyError("telescoping identity violated", frob(lhs), frob(rhs), res);
  }
  return res;
}

nlohmann::json ContinuityReport::to_json() const {
  nlohmann::json s = nlohmann::json::array();
  for (const auto& x : samples) {
    nlohmann::json e{{"t", x.t}, {"modulus", x.modulus}};
    if (x.bound) e["bound"] = *x.bound;
    s.push_back(e);
  }
  return {{"samples", s}, {"max_modulus", max_modulus},
          {"slope", std::isfinite(slope) ? nlohmann::json(slope) : nlohmann::json(nullptr)},
          {"bound_holds", bound_holds}};
}

ContinuityReport continuity_probe(const FunctionFamily& f, const HermitianMatrix& a, const HermitianMatrix& b,
                                  int n, const std::vector<double>& t_grid, int j, double p, bool assert_bound) {
  check_dims(a, b);
  if (n < 1 || n > f.max_order()) throw UnsupportedOrderError("order n must lie in 1..max_order");
  if (j < 1 || j > n + 1) throw ParameterError("j must lie in 1..n+1");
  if (std::find(t_grid.begin(), t_grid.end(), 0.0) == t_grid.end()) {
    throw ParameterError("continuity grid must contain t = 0");
  }
  const EigenSystem ea = eig_hermitian(a);
  const bool with_bound = n + 1 <= f.max_order();
  auto psi = [&](const EigenSystem& et, int order, int lead) {
    std::vector<EigenSystem> ops = repeat(et, lead);
    for (int i = lead; i <= order; ++i) ops.push_back(ea);
    return dd_moi(f, order, std::move(ops), std::vector<Matrix>(static_cast<std::size_t>(order), b.matrix()));
  };
  const Matrix psi0 = psi(ea, n, j);

  ContinuityReport rep;
  rep.samples.resize(t_grid.size());
  parallel_for(t_grid.size(), [&](std::size_t i) {
    const double t = t_grid[i];
    ContinuitySample s;
    s.t = t;
    const EigenSystem et = eig_hermitian(a + b * t);
    s.modulus = schatten_norm(psi(et, n, j) - psi0, p);
    if (with_bound) {
      double acc = 0.0;
      for (int l = 1; l <= j; ++l) acc += schatten_norm(psi(et, n + 1, l), p);
      s.bound = std::abs(t) * acc;
    }
    rep.samples[i] = s;
  });

  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  int used = 0;
  for (const auto& s : rep.samples) {
    rep.max_modulus = std::max(rep.max_modulus, s.modulus);
    if (s.bound && s.modulus > *s.bound * (1.0 + 1e-6) + 1e-14) rep.bound_holds = false;
    if (s.t != 0.0 && s.modulus > 0.0) {
      const double x = std::log(std::abs(s.t));
      const double y = std::log(s.modulus);
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
      ++used;
    }
  }
  const double denom = used * sxx - sx * sx;
  rep.slope = (used >= 2 && denom > 0.0) ? (used * sxy - sx * sy) / denom
                                         : std::numeric_limits<double>::quiet_NaN();
  if (assert_bound && !rep.bound_holds) {
    throw ConsistencyError("continuity modulus exceeds the linear bound", rep.max_modulus, 0.0, rep.max_modulus);
  }
  return rep;
}

std::vector<double> DivergenceTable::heavy_ratios() const {
  std::vector<double> r;
  for (std::size_t i = 1; i < rows.size(); ++i) r.push_back(rows[i].r_heavy / rows[i - 1].r_heavy);
  return r;
}

std::vector<double> DivergenceTable::bounded_ratios() const {
  std::vector<double> r;
  for (std::size_t i = 1; i < rows.size(); ++i) r.push_back(rows[i].r_bounded / rows[i - 1].r_bounded);
  return r;
}

std::string DivergenceTable::to_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "d,t,r_heavy,r_bounded\n";
  for (const auto& r : rows) os << r.d << ',' << r.t << ',' << r.r_heavy << ',' << r.r_bounded << '\n';
  return os.str();
}

nlohmann::json DivergenceTable::to_json() const {
  nlohmann::json rs = nlohmann::json::array();
  for (const auto& r : rows) rs.push_back({{"d", r.d}, {"t", r.t}, {"r_heavy", r.r_heavy}, {"r_bounded", r.r_bounded}});
  return {{"p", p}, {"t0", t0}, {"rows", rs}, {"heavy_ratios", heavy_ratios()}, {"bounded_ratios", bounded_ratios()}};
}

DivergenceTable lp_counterexample_demo(double p, const std::vector<int>& dims, double t0) {
  if (!(p > 1.0) || !std::isfinite(p)) throw ParameterError("counterexample needs 1 < p < inf");
  if (!(t0 > 0.0)) throw ParameterError("t0 must be positive");
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (dims[i] < 1) throw ParameterError("dimensions must be positive");
    if (i > 0 && dims[i] <= dims[i - 1]) throw ParameterError("dimensions must be increasing");
  }
  const FunctionFamily f = families::counterexample();
  const Symbol first = Symbol::divided_difference(f, 1);

  // phi'(t) = f'(a + t b) b on the diagonal, computed as the first-order
  // integral with both operators a + t b.
  auto rate = [&](const std::vector<double>& bdiag, double t, const TraceModel& model) {
    const std::size_t d = bdiag.size();
    std::vector<double> at(d), a0(d, 1.0);
    for (std::size_t k = 0; k < d; ++k) at[k] = 1.0 + t * bdiag[k];
    const std::vector<cplx> bc(bdiag.begin(), bdiag.end());
    const auto dt = moi_diagonal(first, {at, at}, {bc});
    const auto d0 = moi_diagonal(first, {a0, a0}, {bc});
    Eigen::VectorXcd q(static_cast<Eigen::Index>(d));
    for (std::size_t k = 0; k < d; ++k) q(static_cast<Eigen::Index>(k)) = (dt[k] - d0[k]) / t;
    return schatten_norm_diagonal(q, p, model);
  };

  DivergenceTable table;
  table.p = p;
  table.t0 = t0;
  table.rows.resize(dims.size());
  parallel_for(dims.size(), [&](std::size_t i) {
    const int d = dims[i];
    const TraceModel model = TraceModel::uniform(d);
    std::vector<double> heavy(static_cast<std::size_t>(d)), bounded(static_cast<std::size_t>(d), 1.0);
    for (int k = 1; k <= d; ++k) {
      heavy[static_cast<std::size_t>(k - 1)] = std::pow(static_cast<double>(k) / d, -1.0 / (1.5 * p));
    }
    const double t = t0 / d;
    table.rows[i] = {d, t, rate(heavy, t, model), rate(bounded, t, model)};
  });
  return table;
}

}  // namespace moilab
