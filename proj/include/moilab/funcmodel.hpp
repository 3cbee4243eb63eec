#pragma once

#include <complex>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace moilab {

using cplx = std::complex<double>;

/// Closed interval on which a family may be evaluated.
struct Domain {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();

  bool contains(double x) const noexcept { return x >= lo && x <= hi; }
};

/// Declared analytic properties of a function family.
///
/// Vectors are indexed by derivative order k = 0..max_order (entry 0 refers
/// to f itself). `w_class[n]` / `q_class[n]` are *declared* memberships in the
/// function classes required by the order-n trace formulas; they are metadata,
/// never computed from samples.
struct FamilyFlags {
  std::vector<bool> bounded_deriv;
  std::vector<bool> vanishes_at_inf;
  bool compact_support = false;
  bool real_valued = true;
  std::vector<bool> w_class;
  std::vector<bool> q_class;
};

/// A scalar function f: R -> C together with closed-form derivatives
/// f^(0..max_order) and declared admissibility flags. Immutable and cheap to
/// copy (shared state).
class FunctionFamily {
 public:
  /// Writes f^(0..upto)(x) into out[0..upto].
  using Evaluator = std::function<void(double x, int upto, std::span<cplx> out)>;

  struct Options {
    Domain domain{};
    /// Length scale over which Taylor expansions of f stay accurate; +inf for
    /// polynomials (expansion exact).
    double taylor_scale = 1.0;
    /// Known values of sup|f^(k)| (index k); NaN entries are estimated by sampling.
    std::vector<double> sup_abs;
    /// Interval used when sup|f^(k)| must be estimated by sampling.
    double sample_lo = -20.0;
    double sample_hi = 20.0;
    nlohmann::json params = nlohmann::json::object();
  };

  FunctionFamily(std::string id, int max_order, Evaluator evaluator, FamilyFlags flags,
                 Options options);

  const std::string& id() const noexcept;
  int max_order() const noexcept;
  const FamilyFlags& flags() const noexcept;
  const Domain& domain() const noexcept;
  double taylor_scale() const noexcept;
  /// JSON description ({"id": ..., params...}) accepted by `family_from_json`.
  nlohmann::json to_json() const;

  /// f^(k)(x). Throws UnsupportedOrderError / DomainError.
  cplx eval(int k, double x) const;
  cplx operator()(double x) const { return eval(0, x); }
  /// f^(0..upto)(x) in one call.
  void derivatives(double x, int upto, std::span<cplx> out) const;

  bool bounded_deriv(int k) const noexcept;
  bool vanishes_at_inf(int k) const noexcept;
  bool declared_w_class(int n) const noexcept;
  bool declared_q_class(int n) const noexcept;

  /// sup over R of |f^(k)|; +inf when the derivative is flagged unbounded.
  double sup_abs(int k) const;

 private:
  struct Impl;
  std::shared_ptr<const Impl> impl_;
};

namespace families {

/// x^k.
FunctionFamily monomial(int k);
/// c0 + c1 x.
FunctionFamily affine(double c0, double c1);
/// e^x.
FunctionFamily exponential();
/// e^{isx}; complex valued, every derivative bounded.
FunctionFamily fourier(double s);
/// exp(-x^2).
FunctionFamily gaussian();
/// exp(-1/(1-u^2)) with u = (x-center)/radius, zero for |u| >= 1.
FunctionFamily bump(double center = 0.0, double radius = 1.0);
/// 1/(1+x^2).
FunctionFamily rational();
/// 1/(1+x) for x >= 0, continued to x < 0 as a C^2 function with bounded
/// first and second derivatives (f'' = 2/(1+x^2) there).
FunctionFamily counterexample();
/// Sum_i c_i f_i. Flags are the conjunction of the parts' flags.
FunctionFamily linear_combination(const std::vector<std::pair<cplx, FunctionFamily>>& terms);
/// Pointwise product f*g (Leibniz rule for derivatives).
FunctionFamily product(const FunctionFamily& f, const FunctionFamily& g);
/// Order-0 family from a plain callable; used for factor functions of
/// factorized symbols.
FunctionFamily scalar(std::string id, std::function<cplx(double)> fn, double sup_abs,
                      bool real_valued);

}  // namespace families

/// Builds a family from {"id": ..., params}. Ids: monomial{k}, affine{c0,c1},
/// exp, fourier{s}, gaussian, bump{center,radius}, rational, counterexample.
FunctionFamily family_from_json(const nlohmann::json& spec);

/// Nodes after tolerance merging: ascending representatives and multiplicities.
struct MergedNodes {
  std::vector<double> values;
  std::vector<int> multiplicity;
};

/// Default identification tolerance 1e-7 * (1 + max|x|).
double merge_tolerance(std::span<const double> nodes);

/// Sorts nodes and merges (single linkage) neighbours closer than `tol`; each
/// block is represented by its mean.
MergedNodes merge_nodes(std::span<const double> nodes, double tol);

/// f^[n](nodes), n = nodes.size()-1. Symmetric in the nodes; coincident
/// (or tolerance-merged) nodes use confluent derivative values.
cplx divided_difference(const FunctionFamily& f, std::span<const double> nodes);

/// Dense row-major complex tensor.
struct Tensor {
  std::vector<int> shape;
  std::vector<cplx> data;

  std::size_t size() const noexcept { return data.size(); }
  std::size_t offset(std::span<const int> index) const;
  cplx at(std::span<const int> index) const { return data[offset(index)]; }
};

/// Entry (i_0..i_n) = f^[n](lists[0][i_0], ..., lists[n][i_n]); evaluations are
/// shared across permutation-equivalent node multisets within the call.
/// `evaluations` (optional) receives the number of distinct multisets computed.
Tensor divided_difference_tensor(const FunctionFamily& f, int order,
                                 const std::vector<std::vector<double>>& lists,
                                 std::size_t* evaluations = nullptr);

/// Which smoothness and decay hypotheses the declared flags of f satisfy at order n.
struct AdmissibilityReport {
  int order = 0;
  /// f', ..., f^(n) bounded: the Gateaux-derivative formula applies.
  bool derivative_formula = false;
  /// f^(n) vanishes at infinity.
  bool c0_path = false;
  /// Declared W_n membership with its side conditions: trace formula for tau.
  bool trace_formula_tau = false;
  /// Declared Q_n membership with its side conditions: trace formula for Tr.
  bool trace_formula_tr = false;
  /// Neither trace-formula class applies; only approximation arguments remain.
  bool density_path_only = false;
  std::vector<std::string> notes;
};

AdmissibilityReport classify(const FunctionFamily& f, int n);

}  // namespace moilab
