#pragma once

#include <string>
#include <vector>

#include "moilab/moi.hpp"

namespace moilab {

struct DerivativeResult {
  Matrix value;
  /// Missing boundedness flags are reported here rather than thrown.
  std::vector<std::string> warnings;
};

/// k-th derivative of s -> f(A + sB) at s = t, as k! * T_{f^[k]}^{(A+tB)^{k+1}}((B)^k).
DerivativeResult gateaux_derivative(const FunctionFamily& f, const HermitianMatrix& a,
                                    const HermitianMatrix& b, int k, double t);

/// Step used when the caller does not pick one: 5e-2 / (1 + |B|_inf).
double default_fd_step(const HermitianMatrix& b);

/// k-th central difference of s -> f(A + sB) at t with step h, Richardson
/// extrapolated over `levels` halvings of h (levels = 0: plain difference).
Matrix finite_difference_oracle(const FunctionFamily& f, const HermitianMatrix& a,
                                const HermitianMatrix& b, int k, double t, double h, int levels);

struct RemainderResult {
  /// T_{f^[n]}^{A+B,A,...,A}((B)^n)
  Matrix value;
  /// f(A+B) - f(A) - sum_{k<n} T_{f^[k]}^{(A)^{k+1}}((B)^k)
  Matrix sum_form;
  /// |value - sum_form|_F / max(1, |value|_F)
  double relative_difference = 0.0;
};

/// Throws ConsistencyError when the two forms differ by more than `tol`.
RemainderResult taylor_remainder(const FunctionFamily& f, const HermitianMatrix& a,
                                 const HermitianMatrix& b, int n, double tol = 1e-8);

/// Closed form only, from precomputed eigensystems of A+B and A.
Matrix remainder_closed_form(const FunctionFamily& f, const EigenSystem& apb, const EigenSystem& a,
                             const Matrix& b, int n);

/// |T_{f^[1]}^{A,B}(A-B) - (f(A) - f(B))|_F / max(1, |f(A) - f(B)|_F); throws above tol.
double perturbation_first_order(const FunctionFamily& f, const HermitianMatrix& a,
                                const HermitianMatrix& b, double tol = 1e-9);

/// Replacing the operator `a` by `b` in slot j (1-based, 1..k+1) of a k-th order
/// integral with operators `others` (k of them) and arguments `x` (k of them):
///   T_{f^[k]}^{..,b,..}(x) - T_{f^[k]}^{..,a,..}(x) = T_{f^[k+1]}^{..,b,a,..}(x_1..x_{j-1}, b-a, x_j..x_k).
/// Returns |lhs - rhs|_F / max(1, |rhs|_F); throws above tol.
double perturbation_higher_order(const FunctionFamily& f, const HermitianMatrix& a,
                                 const HermitianMatrix& b, const std::vector<HermitianMatrix>& others,
                                 const std::vector<Matrix>& x, int j, double tol = 1e-8);

/// T_{f^[n-1]}^{(A+tB)^j,(A)^{n-j}}((B)^{n-1}) - T_{f^[n-1]}^{(A)^n}((B)^{n-1})
///   = t sum_{l=1..j} T_{f^[n]}^{(A+tB)^l,(A)^{n+1-l}}((B)^n).
/// Returns the relative residual; throws above tol.
double telescoping_check(const FunctionFamily& f, const HermitianMatrix& a, const HermitianMatrix& b,
                         int n, double t, int j, double tol = 1e-8);

struct ContinuitySample {
  double t = 0.0;
  double modulus = 0.0;
  /// |t| * sum_l |T_{f^[n+1]}^{(A+tB)^l,(A)^{n+2-l}}((B)^{n+1})|_p, when n+1 <= max_order.
  std::optional<double> bound;
};

struct ContinuityReport {
  std::vector<ContinuitySample> samples;
  double max_modulus = 0.0;
  /// Least-squares slope of log(modulus) against log|t| (NaN with < 2 usable points).
  double slope = 0.0;
  bool bound_holds = true;

  nlohmann::json to_json() const;
};

/// Modulus |psi(t) - psi(0)|_p of psi(t) = T_{f^[n]}^{(A+tB)^j,(A)^{n+1-j}}((B)^n)
/// on t_grid (must contain 0). With assert_bound, a breach of the linear
/// bound throws ConsistencyError.
ContinuityReport continuity_probe(const FunctionFamily& f, const HermitianMatrix& a, const HermitianMatrix& b,
                                  int n, const std::vector<double>& t_grid, int j = 1, double p = 2.0,
                                  bool assert_bound = false);

struct DivergenceRow {
  int d = 0;
  double t = 0.0;
  double r_heavy = 0.0;
  double r_bounded = 0.0;
};

struct DivergenceTable {
  double p = 0.0;
  double t0 = 0.0;
  std::vector<DivergenceRow> rows;

  /// r(d_{i+1}) / r(d_i) for the heavy and bounded columns.
  std::vector<double> heavy_ratios() const;
  std::vector<double> bounded_ratios() const;
  std::string to_csv() const;
  nlohmann::json to_json() const;
};

/// Weighted diagonal model with weights 1/d, a = 1, f(x) = 1/(1+x) on x >= 0:
/// r(d, t) = |(phi'(t) - phi'(0)) / t|_p at t = t0/d for the heavy-tailed
/// b_k = (k/d)^{-1/(1.5p)} and the bounded control b_k = 1.
DivergenceTable lp_counterexample_demo(double p, const std::vector<int>& dims, double t0 = 1.0);

}  // namespace moilab
