#pragma once

#include <optional>
#include <string>
#include <vector>

#include "moilab/moi.hpp"

namespace moilab {

/// Uniform-grid samples of a spectral shift function of order n.
struct SSFGrid {
  enum class Method { counting, fourier };

  int order = 1;
  Method method = Method::counting;
  double t0 = 0.0;
  double dt = 0.0;
  std::vector<double> values;
  double support_lo = 0.0;
  double support_hi = 0.0;
  /// Trapezoid quadrature of |values|.
  double l1_norm = 0.0;

  /// counting only: ascending jump points and the constant value on each of
  /// the breakpoints.size()+1 intervals (first and last are zero).
  std::vector<double> breakpoints;
  std::vector<int> levels;

  /// fourier only: max |imag| of the inversion before it was discarded.
  double imag_residue = 0.0;
  nlohmann::json params = nlohmann::json::object();
  std::optional<std::uint64_t> seed;

  std::size_t size() const noexcept { return values.size(); }
  double t(std::size_t i) const noexcept { return t0 + dt * static_cast<double>(i); }
  /// Exact for counting grids, linear interpolation (zero outside) otherwise.
  double evaluate(double t) const;

  /// (t, value) rows with a header line.
  std::string to_csv() const;
  nlohmann::ordered_json sidecar() const;
  /// Writes `path` and `path` + ".json".
  void save(const std::string& path) const;
};

struct FourierParams {
  enum class Window { none, cosine_taper };

  double s_max = 0.0;
  /// Intervals of the symmetric s grid: num_s + 1 samples s_j = (j - num_s/2) * ds
  /// covering [-s_max, s_max], trapezoid weights at both ends.
  int num_s = 0;
  double s_min_exclusion = 0.0;
  Window window = Window::cosine_taper;
  double t_min = 0.0;
  double t_max = 0.0;
  double t_step = 0.0;

  double ds() const { return 2.0 * s_max / num_s; }
  /// Throws ParameterError on inconsistent values (Nyquist, parity, exclusion).
  void validate() const;
  nlohmann::json to_json() const;

  /// Parameters sized to the spectra of A and A+B: period 1.5x the padded
  /// hull, s_max = max(4000, 4000/width) rounded up to a power-of-two sample
  /// count, t step pi/(2 s_max). Only s = 0 is excluded (exclusion ds/2):
  /// F(s) comes from the closed-form integral, which stays accurate near 0.
  static FourierParams automatic(const EigenSystem& a, const EigenSystem& apb);
};

/// eta_1(t) = #{eig(A+B) > t} - #{eig(A) > t} on a grid of step `dt`
/// (default: hull width / 4096).
SSFGrid krein_ssf(const HermitianMatrix& a, const HermitianMatrix& b, std::optional<double> dt = std::nullopt);

/// eta_n recovered from F(s) = Tr(R_n(e^{is.}, A, B)) by Fourier inversion.
/// Throws InversionQualityError when the imaginary residue exceeds
/// 1e-6 * l1_norm.
SSFGrid higher_ssf_fourier(const HermitianMatrix& a, const HermitianMatrix& b, int n,
                           std::optional<FourierParams> params = std::nullopt);

/// integral of f^(n)(t) eta(t) dt: exact breakpoint telescoping for counting
/// grids of order 1, trapezoid otherwise.
cplx pair_with_derivative(const SSFGrid& ssf, const FunctionFamily& f);

/// integral of t^k eta(t) dt (trapezoid, or exact for counting grids).
double ssf_moment(const SSFGrid& ssf, int k);

struct TraceFormulaEntry {
  std::string function;
  cplx trace_remainder;
  cplx pairing;
  double relative_error = 0.0;
};

struct MomentEntry {
  int k = 0;
  double moment = 0.0;
  double expected = 0.0;
  /// |moment - expected| / (1 + |expected|)
  double error = 0.0;
};

struct TraceFormulaReport {
  std::vector<TraceFormulaEntry> functions;
  std::vector<MomentEntry> moments;
  double max_function_error() const;
  double max_moment_error() const;
  nlohmann::json to_json() const;
};

/// Compares Tr(R_n(f, A, B)) with the pairing for each test function and
/// checks the moments k = 0, 1, 2 against (k!/(n+k)!) Tr(R_n(x^{n+k})).
TraceFormulaReport verify_trace_formula(const HermitianMatrix& a, const HermitianMatrix& b, int n,
                                        const SSFGrid& ssf, const std::vector<FunctionFamily>& test_functions);

struct DiagonalSymbolReport {
  /// Tr(T_{phi}^{A,A+B,A..A}((B)^{n-1}) B) with phi(l_0..l_{n-1}) = f^[n](l_0..l_{n-1}, l_0)
  cplx restricted;
  /// Tr(T_{f^[n]}^{A,A+B,A,..,A}((B)^n))
  cplx full;
  std::optional<cplx> pairing;
  double identity_error = 0.0;
  std::optional<double> pairing_error;
  nlohmann::json to_json() const;
};

/// Requires n >= 2. Throws ConsistencyError if the two traces differ by more
/// than 1e-9 relative; the pairing error is reported, not asserted.
DiagonalSymbolReport diagonal_symbol_trace(const HermitianMatrix& a, const HermitianMatrix& b, int n,
                                           const FunctionFamily& f, const SSFGrid* ssf = nullptr);

struct L1Report {
  double l1_norm = 0.0;
  /// |B|_n^n
  double b_norm_power = 0.0;
  /// l1_norm / b_norm_power (0 when both vanish).
  double ratio = 0.0;
  nlohmann::json to_json() const;
};

L1Report ssf_l1_report(const HermitianMatrix& b, int n, const SSFGrid& ssf);

/// Trapezoid L1 distance between two grids, sampled on the first grid.
double ssf_l1_distance(const SSFGrid& a, const SSFGrid& b);

std::string to_string(SSFGrid::Method m);

}  // namespace moilab
