#include "moilab/moi.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include "moilab/error.hpp"

namespace moilab {

// ---------------------------------------------------------------- Symbol

struct Symbol::State {
  Kind kind = Kind::custom;
  int arity = 0;
  std::optional<FunctionFamily> family;
  std::vector<FactorTerm> terms;
  std::optional<Symbol> base;
  Evaluator fn;
  std::string name;
};

Symbol Symbol::divided_difference(FunctionFamily f, int n) {
  if (n < 0) throw ParameterError("divided-difference symbol needs n >= 0");
  if (n > f.max_order()) {
    throw UnsupportedOrderError("symbol order " + std::to_string(n) + " exceeds max_order of '" +
                                f.id() + "'");
  }
  auto s = std::make_shared<State>();
  s->kind = Kind::divided_difference;
  s->arity = n + 1;
  s->family = std::move(f);
  s->name = "divided_difference";
  return Symbol(std::move(s));
}

Symbol Symbol::factorized(std::vector<FactorTerm> terms) {
  if (terms.empty()) throw ParameterError("factorized symbol needs at least one term");
  const std::size_t arity = terms.front().factors.size();
  if (arity == 0) throw ParameterError("factorized symbol needs at least one factor per term");
  for (const auto& t : terms) {
    if (t.factors.size() != arity) throw ParameterError("factorized terms differ in arity");
    if (!std::isfinite(t.weight.real()) || !std::isfinite(t.weight.imag())) {
      throw ParameterError("factorized weight is not finite");
    }
  }
  auto s = std::make_shared<State>();
  s->kind = Kind::factorized;
  s->arity = static_cast<int>(arity);
  s->terms = std::move(terms);
  s->name = "factorized";
  return Symbol(std::move(s));
}

Symbol Symbol::diagonal_restricted(Symbol base) {
  if (base.arity() < 2) throw ParameterError("diagonal restriction needs a base of arity >= 2");
  auto s = std::make_shared<State>();
  s->kind = Kind::diagonal_restricted;
  s->arity = base.arity() - 1;
  s->base = std::move(base);
  s->name = "diagonal_restricted";
  return Symbol(std::move(s));
}

Symbol Symbol::custom(int arity, Evaluator fn, std::string name) {
  if (arity < 1) throw ParameterError("custom symbol needs arity >= 1");
  auto s = std::make_shared<State>();
  s->kind = Kind::custom;
  s->arity = arity;
  s->fn = std::move(fn);
  s->name = std::move(name);
  return Symbol(std::move(s));
}

Symbol::Kind Symbol::kind() const noexcept { return state_->kind; }
int Symbol::arity() const noexcept { return state_->arity; }

const FunctionFamily& Symbol::family() const {
  if (state_->kind != Kind::divided_difference) throw ContractViolation("symbol is not a divided difference");
  return *state_->family;
}

const std::vector<FactorTerm>& Symbol::terms() const {
  if (state_->kind != Kind::factorized) throw ContractViolation("symbol is not factorized");
  return state_->terms;
}

const Symbol& Symbol::base() const {
  if (state_->kind != Kind::diagonal_restricted) throw ContractViolation("symbol is not a diagonal restriction");
  return *state_->base;
}

cplx Symbol::operator()(std::span<const double> l) const {
  if (static_cast<int>(l.size()) != state_->arity) {
    throw DimensionMismatch("symbol of arity " + std::to_string(state_->arity) + " evaluated at " +
                            std::to_string(l.size()) + " points");
  }
  switch (state_->kind) {
    case Kind::divided_difference:
      return moilab::divided_difference(*state_->family, l);
    case Kind::factorized: {
      cplx acc = 0.0;
      for (const auto& t : state_->terms) {
        cplx prod = t.weight;
        for (std::size_t j = 0; j < t.factors.size(); ++j) prod *= t.factors[j].eval(0, l[j]);
        acc += prod;
      }
      return acc;
    }
    case Kind::diagonal_restricted: {
      std::vector<double> full(l.begin(), l.end());
      full.push_back(l[0]);
      return (*state_->base)(full);
    }
    case Kind::custom:
      return state_->fn(l);
  }
  throw ContractViolation("unknown symbol kind");
}

double Symbol::factorized_norm_bound() const {
  double acc = 0.0;
  for (const auto& t : terms()) {
    double prod = std::abs(t.weight);
    for (const auto& f : t.factors) prod *= f.sup_abs(0);
    acc += prod;
  }
  return acc;
}

Symbol Symbol::restricted_as_factorized() const {
  if (state_->kind != Kind::diagonal_restricted || state_->base->kind() != Kind::factorized) {
    throw ContractViolation("restricted_as_factorized needs a diagonal restriction of a factorized symbol");
  }
  std::vector<FactorTerm> out;
  for (const auto& t : state_->base->terms()) {
    FactorTerm r{t.weight, {}};
    r.factors.push_back(families::product(t.factors.back(), t.factors.front()));
    for (std::size_t j = 1; j + 1 < t.factors.size(); ++j) r.factors.push_back(t.factors[j]);
    out.push_back(std::move(r));
  }
  return factorized(std::move(out));
}

nlohmann::json Symbol::to_json() const {
  nlohmann::json j{{"kind", state_->name}, {"arity", state_->arity}};
  if (state_->family) j["f"] = state_->family->to_json();
  if (state_->kind == Kind::factorized) j["terms"] = state_->terms.size();
  if (state_->base) j["base"] = state_->base->to_json();
  return j;
}

// --------------------------------------------------- Fourier factorization

namespace {

// Gauss-Legendre nodes/weights on [0, 1].
void gauss_legendre01(int n, std::vector<double>& x, std::vector<double>& w) {
  x.assign(static_cast<std::size_t>(n), 0.0);
  w.assign(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0;
      double p1 = 0.0;
      for (int k = 1; k <= n; ++k) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
      }
      dp = n * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    const double weight = 2.0 / ((1.0 - z * z) * dp * dp);
    x[static_cast<std::size_t>(i)] = 0.5 * (1.0 - z);
    x[static_cast<std::size_t>(n - 1 - i)] = 0.5 * (1.0 + z);
    w[static_cast<std::size_t>(i)] = 0.5 * weight;
    w[static_cast<std::size_t>(n - 1 - i)] = 0.5 * weight;
  }
}

}  // namespace

Symbol fourier_divided_difference_symbol(double s, int n, int nodes_per_axis) {
  if (n < 1) throw ParameterError("fourier factorization needs n >= 1");
  if (nodes_per_axis < 1) throw ParameterError("nodes_per_axis must be positive");
  std::vector<double> gx;
  std::vector<double> gw;
  gauss_legendre01(nodes_per_axis, gx, gw);
  const cplx scale = std::pow(cplx(0.0, s), n);
  std::vector<FactorTerm> terms;
  std::vector<int> idx(static_cast<std::size_t>(n), 0);
  while (true) {
    // stick-breaking map (u_1..u_n) -> simplex point (t_0..t_n)
    std::vector<double> t(static_cast<std::size_t>(n) + 1);
    double remaining = 1.0;
    double weight = 1.0;
    for (int i = 0; i < n; ++i) {
      const double u = gx[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])];
      weight *= gw[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])] * std::pow(1.0 - u, n - 1 - i);
      t[static_cast<std::size_t>(i)] = remaining * u;
      remaining *= 1.0 - u;
    }
    t[static_cast<std::size_t>(n)] = remaining;
    FactorTerm term{scale * weight, {}};
    for (double tj : t) term.factors.push_back(families::fourier(s * tj));
    terms.push_back(std::move(term));
    int a = n - 1;
    while (a >= 0 && ++idx[static_cast<std::size_t>(a)] == nodes_per_axis) {
      idx[static_cast<std::size_t>(a)] = 0;
      --a;
    }
    if (a < 0) break;
  }
  return Symbol::factorized(std::move(terms));
}

// ------------------------------------------------------------- operands

int MOIOperands::dim() const {
  if (operators.empty()) throw ContractViolation("MOI needs at least one operator");
  return operators.front().dim();
}

double MOIOperands::inverse_p() const {
  if (exponents.empty()) return std::numeric_limits<double>::quiet_NaN();
  double acc = 0.0;
  for (double p : exponents) acc += 1.0 / p;
  return acc;
}

void MOIOperands::validate() const {
  if (operators.size() != arguments.size() + 1) {
    throw ContractViolation("MOI needs n+1 operators for n arguments (got " +
                            std::to_string(operators.size()) + " and " +
                            std::to_string(arguments.size()) + ")");
  }
  const int d = dim();
  for (const auto& e : operators) {
    if (e.dim() != d) throw DimensionMismatch("MOI operators differ in dimension");
  }
  for (const auto& b : arguments) {
    if (b.rows() != d || b.cols() != d) throw DimensionMismatch("MOI argument dimension mismatch");
  }
  if (!exponents.empty()) {
    if (exponents.size() != arguments.size()) throw DimensionMismatch("one exponent per argument required");
    for (double p : exponents) {
      if (!(p > 1.0)) throw ParameterError("argument exponents must exceed 1");
    }
  }
}

nlohmann::json MOIDiagnostics::to_json() const {
  nlohmann::json j{{"cluster_counts", cluster_counts},
                   {"symbol_evaluations", symbol_evaluations},
                   {"inverse_p", inverse_p}};
  if (measured_ratio) j["measured_ratio"] = *measured_ratio;
  return j;
}

nlohmann::json NormReport::to_json() const {
  nlohmann::json j{{"ratio", ratio}, {"numerator", numerator}, {"denominator", denominator}, {"p", p}};
  if (bound) j["bound"] = *bound;
  return j;
}

// ---------------------------------------------------------- contraction

Tensor evaluate_symbol(const Symbol& phi, const std::vector<std::vector<double>>& nodes,
                       std::size_t* evaluations) {
  if (static_cast<int>(nodes.size()) != phi.arity()) {
    throw ContractViolation("symbol arity does not match number of node lists");
  }
  if (phi.kind() == Symbol::Kind::divided_difference) {
    return divided_difference_tensor(phi.family(), phi.order(), nodes, evaluations);
  }
  Tensor t;
  std::size_t total = 1;
  for (const auto& l : nodes) {
    if (l.empty()) throw ContractViolation("empty node list");
    t.shape.push_back(static_cast<int>(l.size()));
    total *= l.size();
  }
  t.data.resize(total);
  const bool symmetric_base = phi.kind() == Symbol::Kind::diagonal_restricted &&
                              phi.base().kind() == Symbol::Kind::divided_difference;
  std::map<std::vector<double>, cplx> memo;
  std::vector<int> idx(nodes.size(), 0);
  std::vector<double> point(nodes.size());
  std::size_t evals = 0;
  for (std::size_t flat = 0; flat < total; ++flat) {
    for (std::size_t a = 0; a < nodes.size(); ++a) point[a] = nodes[a][static_cast<std::size_t>(idx[a])];
    if (symmetric_base) {
      std::vector<double> key(point);
      key.push_back(point[0]);
      std::sort(key.begin(), key.end());
      auto it = memo.find(key);
      if (it == memo.end()) {
        it = memo.emplace(key, moilab::divided_difference(phi.base().family(), key)).first;
        ++evals;
      }
      t.data[flat] = it->second;
    } else {
      t.data[flat] = phi(point);
      ++evals;
    }
    for (std::size_t a = nodes.size(); a-- > 0;) {
      if (++idx[a] < t.shape[a]) break;
      idx[a] = 0;
    }
  }
  if (evaluations) *evaluations = evals;
  return t;
}

namespace {

using RowMatrix = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Sum over cluster multi-indices of phi[i_0..i_n] P_{i_0} B_1 P_{i_1} ... B_n P_{i_n},
// evaluated row by row in the eigenbases with left partial products.
Matrix contract(const Tensor& phi, const std::vector<const Matrix*>& bases,
                const std::vector<const std::vector<Cluster>*>& clusters,
                const std::vector<Matrix>& args) {
  const std::size_t n = args.size();
  const auto d = static_cast<int>(bases.front()->rows());
  std::vector<RowMatrix> bt(n);
  for (std::size_t k = 0; k < n; ++k) bt[k] = bases[k]->adjoint() * args[k] * (*bases[k + 1]);

  std::vector<int> cluster_of_row(static_cast<std::size_t>(d));
  for (std::size_t c = 0; c < clusters[0]->size(); ++c) {
    const Cluster& cl = (*clusters[0])[c];
    for (int i = 0; i < cl.size; ++i) cluster_of_row[static_cast<std::size_t>(cl.begin + i)] = static_cast<int>(c);
  }

  Matrix rt = Matrix::Zero(d, d);
  std::vector<std::vector<cplx>> y(n + 1, std::vector<cplx>(static_cast<std::size_t>(d)));

  auto is_zero = [](const std::vector<cplx>& v, int begin, int size) {
    for (int j = begin; j < begin + size; ++j)
      if (v[static_cast<std::size_t>(j)] != cplx(0.0)) return false;
    return true;
  };

  for (int r = 0; r < d; ++r) {
    for (int j = 0; j < d; ++j) y[1][static_cast<std::size_t>(j)] = bt[0](r, j);
    auto rec = [&](auto&& self, std::size_t level, std::size_t prefix) -> void {
      const auto& cl = *clusters[level];
      const std::size_t width = cl.size();
      if (level == n) {
        for (std::size_t c = 0; c < width; ++c) {
          const cplx coef = phi.data[prefix * width + c];
          for (int j = cl[c].begin; j < cl[c].begin + cl[c].size; ++j) {
            rt(r, j) += coef * y[level][static_cast<std::size_t>(j)];
          }
        }
        return;
      }
      const RowMatrix& next = bt[level];
      for (std::size_t c = 0; c < width; ++c) {
        if (is_zero(y[level], cl[c].begin, cl[c].size)) continue;
        auto& out = y[level + 1];
        std::fill(out.begin(), out.end(), cplx(0.0));
        for (int j = cl[c].begin; j < cl[c].begin + cl[c].size; ++j) {
          const cplx yj = y[level][static_cast<std::size_t>(j)];
          if (yj == cplx(0.0)) continue;
          for (int k = 0; k < d; ++k) out[static_cast<std::size_t>(k)] += yj * next(j, k);
        }
        self(self, level + 1, prefix * width + c);
      }
    };
    rec(rec, 1, static_cast<std::size_t>(cluster_of_row[static_cast<std::size_t>(r)]));
  }
  return (*bases.front()) * rt * bases.back()->adjoint();
}

void check_arity(const Symbol& phi, const MOIOperands& ops) {
  ops.validate();
  if (phi.arity() != static_cast<int>(ops.operators.size())) {
    throw ContractViolation("symbol arity " + std::to_string(phi.arity()) + " does not match " +
                            std::to_string(ops.operators.size()) + " operators");
  }
}

}  // namespace

MOIResult moi_projection_sum(const Symbol& phi, const MOIOperands& ops) {
  check_arity(phi, ops);
  std::vector<std::vector<double>> reps;
  std::vector<const Matrix*> bases;
  std::vector<const std::vector<Cluster>*> clusters;
  MOIResult result;
  for (const auto& e : ops.operators) {
    reps.push_back(e.representatives());
    bases.push_back(&e.basis);
    clusters.push_back(&e.clusters);
    result.diagnostics.cluster_counts.push_back(static_cast<int>(e.clusters.size()));
  }
  Tensor t;
  try {
    t = evaluate_symbol(phi, reps, &result.diagnostics.symbol_evaluations);
  } catch (const DomainError&) {
    throw;
  } catch (const UnsupportedOrderError&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(std::string("symbol evaluation failed: ") + e.what());
  }
  for (const auto& v : t.data) {
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) {
      throw Error("symbol evaluation produced a non-finite value");
    }
  }
  result.value = contract(t, bases, clusters, ops.arguments);
  result.diagnostics.inverse_p = ops.exponents.empty() ? 0.0 : ops.inverse_p();
  return result;
}

MOIResult moi_discretized(const Symbol& phi, const MOIOperands& ops, int m, int window) {
  check_arity(phi, ops);
  if (m < 1) throw ParameterError("discretization level m must be >= 1");
  if (window < 0) throw ParameterError("window must be non-negative");
  std::vector<std::vector<double>> corners;
  std::vector<std::vector<Cluster>> bins(ops.operators.size());
  std::vector<const Matrix*> bases;
  std::vector<const std::vector<Cluster>*> clusters;
  MOIResult result;
  for (std::size_t s = 0; s < ops.operators.size(); ++s) {
    const EigenSystem& e = ops.operators[s];
    std::vector<double> c;
    for (int i = 0; i < e.dim(); ++i) {
      const double l = std::floor(e.eigenvalues(i) * m);
      if (std::abs(l) > window) {
        throw WindowError("eigenvalue " + std::to_string(e.eigenvalues(i)) + " lies outside the window [-" +
                          std::to_string(window) + ", " + std::to_string(window) + "]/" + std::to_string(m));
      }
      if (bins[s].empty() || c.back() != l / m) {
        bins[s].push_back({i, 1, l / m});
        c.push_back(l / m);
      } else {
        ++bins[s].back().size;
      }
    }
    corners.push_back(std::move(c));
    bases.push_back(&e.basis);
    result.diagnostics.cluster_counts.push_back(static_cast<int>(bins[s].size()));
  }
  for (const auto& b : bins) clusters.push_back(&b);
  const Tensor t = evaluate_symbol(phi, corners, &result.diagnostics.symbol_evaluations);
  result.value = contract(t, bases, clusters, ops.arguments);
  result.diagnostics.inverse_p = ops.exponents.empty() ? 0.0 : ops.inverse_p();
  return result;
}

MOIResult moi_factorized(const Symbol& phi, const MOIOperands& ops) {
  check_arity(phi, ops);
  if (phi.kind() != Symbol::Kind::factorized) throw ContractViolation("moi_factorized needs a factorized symbol");
  const int d = ops.dim();
  MOIResult result;
  result.value = Matrix::Zero(d, d);
  for (const auto& e : ops.operators) result.diagnostics.cluster_counts.push_back(static_cast<int>(e.clusters.size()));
  for (const auto& term : phi.terms()) {
    Matrix acc = apply_function(term.factors[0], ops.operators[0]);
    for (std::size_t k = 0; k < ops.arguments.size(); ++k) {
      acc = (acc * ops.arguments[k]).eval() * apply_function(term.factors[k + 1], ops.operators[k + 1]);
    }
    result.value += term.weight * acc;
    result.diagnostics.symbol_evaluations += term.factors.size() * static_cast<std::size_t>(d);
  }
  result.diagnostics.inverse_p = ops.exponents.empty() ? 0.0 : ops.inverse_p();
  return result;
}

NormReport moi_norm_report(const Symbol& phi, const MOIOperands& ops, double p) {
  check_arity(phi, ops);
  if (!(p > 1.0) || !std::isfinite(p)) throw ParameterError("norm report needs 1 < p < inf");
  if (ops.exponents.empty()) throw ParameterError("norm report needs argument exponents");
  if (std::abs(ops.inverse_p() - 1.0 / p) > 1e-12) {
    throw ParameterError("argument exponents violate sum 1/p_i = 1/p");
  }
  NormReport rep;
  rep.p = p;
  double scale = 1.0;
  if (phi.kind() == Symbol::Kind::divided_difference) {
    const int n = phi.order();
    if (!phi.family().bounded_deriv(n)) {
      throw ParameterError("norm report needs a bounded n-th derivative flag");
    }
    scale = phi.family().sup_abs(n);
  } else if (phi.kind() != Symbol::Kind::factorized) {
    throw ContractViolation("norm report needs a divided-difference or factorized symbol");
  }
  const MOIResult r = moi_projection_sum(phi, ops);
  rep.numerator = schatten_norm(r.value, p);
  double prod = scale;
  for (std::size_t i = 0; i < ops.arguments.size(); ++i) prod *= schatten_norm(ops.arguments[i], ops.exponents[i]);
  rep.denominator = prod;
  rep.ratio = rep.numerator == 0.0 ? 0.0 : rep.numerator / rep.denominator;
  if (phi.kind() == Symbol::Kind::factorized) {
    rep.bound = phi.factorized_norm_bound();
    if (rep.ratio > *rep.bound * (1.0 + 1e-9)) {
      throw ConsistencyError("measured MOI norm ratio exceeds the factorization bound", rep.ratio, *rep.bound,
                             rep.ratio - *rep.bound);
    }
  }
  return rep;
}

cplx moi_trace(const Symbol& phi, const MOIOperands& ops, const Matrix& closing, const TraceModel& model) {
  const MOIResult r = moi_projection_sum(phi, ops);
  if (closing.rows() != r.value.cols() || closing.cols() != r.value.rows()) {
    throw DimensionMismatch("closing matrix dimension mismatch");
  }
  const cplx value = trace(r.value * closing, model);
  if (model.kind != TraceModel::Kind::standard) return value;

  const bool factorized = phi.kind() == Symbol::Kind::factorized;
  const bool restricted = phi.kind() == Symbol::Kind::diagonal_restricted &&
                          phi.base().kind() == Symbol::Kind::factorized;
  if (!factorized && !restricted) return value;

  // cyclically rotated product form
  cplx rotated = 0.0;
  const auto& terms = factorized ? phi.terms() : phi.base().terms();
  for (const auto& t : terms) {
    const std::size_t nf = t.factors.size();
    Matrix acc;
    if (factorized) {
      // alpha_n(a_{n+1}) C alpha_0(a_1) b_1 ... alpha_{n-1}(a_n) b_n
      acc = apply_function(t.factors[nf - 1], ops.operators[nf - 1]) * closing;
      for (std::size_t k = 0; k + 1 < nf; ++k) {
        acc = (acc * apply_function(t.factors[k], ops.operators[k])).eval() * ops.arguments[k];
      }
    } else {
      // alpha_0(a_1) b_1 ... b_{n-1} alpha_{n-1}(a_n) C alpha_n(a_1)
      acc = apply_function(t.factors[0], ops.operators[0]);
      for (std::size_t k = 0; k < ops.arguments.size(); ++k) {
        acc = (acc * ops.arguments[k]).eval() * apply_function(t.factors[k + 1], ops.operators[k + 1]);
      }
      acc = (acc * closing).eval() * apply_function(t.factors[nf - 1], ops.operators[0]);
    }
    rotated += t.weight * acc.trace();
  }
  const double scale = std::max({std::abs(value), std::abs(rotated), 1e-300});
  if (std::abs(value - rotated) > 1e-9 * scale && std::abs(value - rotated) > 1e-13) {
    throw ConsistencyError("trace of projection sum disagrees with the rotated factorized form",
                           std::abs(value), std::abs(rotated), std::abs(value - rotated));
  }
  return value;
}

std::vector<cplx> moi_diagonal(const Symbol& phi, const std::vector<std::vector<double>>& operator_diagonals,
                               const std::vector<std::vector<cplx>>& argument_diagonals) {
  if (operator_diagonals.size() != argument_diagonals.size() + 1) {
    throw ContractViolation("diagonal MOI needs n+1 operators for n arguments");
  }
  if (phi.arity() != static_cast<int>(operator_diagonals.size())) {
    throw ContractViolation("symbol arity does not match operator count");
  }
  const std::size_t d = operator_diagonals.front().size();
  for (const auto& v : operator_diagonals)
    if (v.size() != d) throw DimensionMismatch("diagonal operators differ in dimension");
  for (const auto& v : argument_diagonals)
    if (v.size() != d) throw DimensionMismatch("diagonal arguments differ in dimension");
  std::vector<cplx> out(d);
  std::vector<double> point(operator_diagonals.size());
  for (std::size_t k = 0; k < d; ++k) {
    for (std::size_t s = 0; s < operator_diagonals.size(); ++s) point[s] = operator_diagonals[s][k];
    cplx v = phi(point);
    for (const auto& b : argument_diagonals) v *= b[k];
    out[k] = v;
  }
  return out;
}

}  // namespace moilab
