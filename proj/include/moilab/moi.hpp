#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "moilab/funcmodel.hpp"
#include "moilab/spectral.hpp"

namespace moilab {

/// One term w * alpha_0(l_0) * ... * alpha_n(l_n) of a factorized symbol.
struct FactorTerm {
  cplx weight;
  std::vector<FunctionFamily> factors;
};

/// A function phi: R^{arity} -> C driving a multiple operator integral.
class Symbol {
 public:
  enum class Kind { divided_difference, factorized, diagonal_restricted, custom };
  using Evaluator = std::function<cplx(std::span<const double>)>;

  /// f^[n], arity n+1.
  static Symbol divided_difference(FunctionFamily f, int n);
  /// Finite sum of tensor products; all terms must have the same arity.
  static Symbol factorized(std::vector<FactorTerm> terms);
  /// phi(l_0..l_{n-1}) = base(l_0, ..., l_{n-1}, l_0); arity base.arity()-1.
  static Symbol diagonal_restricted(Symbol base);
  static Symbol custom(int arity, Evaluator fn, std::string name = "custom");

  Kind kind() const noexcept;
  int arity() const noexcept;
  /// arity - 1: the number of operator arguments the MOI takes.
  int order() const noexcept { return arity() - 1; }

  cplx operator()(std::span<const double> lambdas) const;

  /// divided_difference only.
  const FunctionFamily& family() const;
  /// factorized only.
  const std::vector<FactorTerm>& terms() const;
  /// diagonal_restricted only.
  const Symbol& base() const;

  /// Sum |w| * prod sup|alpha_j| over terms (factorized only).
  double factorized_norm_bound() const;

  /// The same restriction expressed as a factorized symbol: first factor
  /// alpha_n * alpha_0. Requires a diagonal_restricted symbol over a
  /// factorized base.
  Symbol restricted_as_factorized() const;

  nlohmann::json to_json() const;

 private:
  struct State;
  explicit Symbol(std::shared_ptr<const State> s) : state_(std::move(s)) {}
  std::shared_ptr<const State> state_;
};

/// Finite factorization of the divided difference of e^{isx}:
///   f^[n](l) = (is)^n * integral over the unit simplex of prod_j e^{i s t_j l_j},
/// discretized by a collapsed Gauss-Legendre rule with `nodes_per_axis`^n terms.
Symbol fourier_divided_difference_symbol(double s, int n, int nodes_per_axis = 20);

/// Operators a_1..a_{n+1} (as eigensystems) and arguments b_1..b_n.
struct MOIOperands {
  std::vector<EigenSystem> operators;
  std::vector<Matrix> arguments;
  /// Optional Schatten exponents p_i of the arguments.
  std::vector<double> exponents;

  int order() const noexcept { return static_cast<int>(arguments.size()); }
  int dim() const;
  /// sum 1/p_i (NaN when exponents are absent).
  double inverse_p() const;
  void validate() const;
};

struct MOIDiagnostics {
  std::vector<int> cluster_counts;
  std::size_t symbol_evaluations = 0;
  std::optional<double> measured_ratio;
  double inverse_p = 0.0;

  nlohmann::json to_json() const;
};

struct MOIResult {
  Matrix value;
  MOIDiagnostics diagnostics;
};

/// T_phi^{a_1..a_{n+1}}(b_1..b_n) = sum over cluster multi-indices of
/// phi(reps) P^(1)_{i_0} b_1 P^(2)_{i_1} ... b_n P^(n+1)_{i_n}.
MOIResult moi_projection_sum(const Symbol& phi, const MOIOperands& ops);

/// The discretized sum S_{phi,m}: spectral projections onto the bins
/// [l/m, (l+1)/m), |l| <= window, with phi evaluated at the bin corners l/m.
/// Throws WindowError if a spectrum leaves the window.
MOIResult moi_discretized(const Symbol& phi, const MOIOperands& ops, int m, int window);

/// sum_terms w * alpha_0(a_1) b_1 alpha_1(a_2) ... b_n alpha_n(a_{n+1}).
MOIResult moi_factorized(const Symbol& phi, const MOIOperands& ops);

struct NormReport {
  double ratio = 0.0;
  double numerator = 0.0;
  double denominator = 0.0;
  double p = 0.0;
  /// Factorized symbols: the sum |w| prod sup|alpha| that bounds the ratio.
  std::optional<double> bound;

  nlohmann::json to_json() const;
};

/// Measured |T(b)|_p / (sup|f^(n)| prod |b_i|_{p_i}) for divided-difference
/// symbols, or |T(b)|_p / prod |b_i|_{p_i} for factorized ones (then also
/// checked against the factorization bound). Requires sum 1/p_i = 1/p, 1<p<inf.
NormReport moi_norm_report(const Symbol& phi, const MOIOperands& ops, double p);

/// trace(T_phi(b) * closing). For factorized symbols (and diagonal restrictions
/// of them) under the standard trace, the cyclically rotated product form is
/// evaluated as well and must agree to 1e-9 relative.
cplx moi_trace(const Symbol& phi, const MOIOperands& ops, const Matrix& closing,
               const TraceModel& model = TraceModel::standard());

/// Commutative model: operators and arguments diagonal; returns the diagonal
/// phi(a_1[k], ..., a_{n+1}[k]) * b_1[k] * ... * b_n[k].
std::vector<cplx> moi_diagonal(const Symbol& phi,
                               const std::vector<std::vector<double>>& operator_diagonals,
                               const std::vector<std::vector<cplx>>& argument_diagonals);

/// Symbol values on the product of per-slot node lists (memoized for
/// divided differences).
Tensor evaluate_symbol(const Symbol& phi, const std::vector<std::vector<double>>& nodes,
                       std::size_t* evaluations = nullptr);

}  // namespace moilab
