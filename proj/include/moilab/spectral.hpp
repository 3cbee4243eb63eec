#pragma once

#include <complex>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "moilab/funcmodel.hpp"

namespace moilab {

using Matrix = Eigen::MatrixXcd;

/// Square complex matrix with entries[i][j] == conj(entries[j][i]) and all
/// entries finite; validated on construction.
class HermitianMatrix {
 public:
  /// Throws ContractViolation unless `m` is square, finite and Hermitian to
  /// `tol * max(1, |m|_max)`.
  explicit HermitianMatrix(Matrix m, double tol = 1e-12);

  static HermitianMatrix zero(int d);
  static HermitianMatrix identity(int d);
  static HermitianMatrix diagonal(const std::vector<double>& values);

  const Matrix& matrix() const noexcept { return m_; }
  int dim() const noexcept { return static_cast<int>(m_.rows()); }

  HermitianMatrix operator+(const HermitianMatrix& other) const;
  HermitianMatrix operator-(const HermitianMatrix& other) const;
  HermitianMatrix operator*(double s) const;

 private:
  struct Trusted {};
  HermitianMatrix(Matrix m, Trusted) : m_(std::move(m)) {}
  Matrix m_;
};

/// Block of consecutive (ascending) eigenvalues identified as one spectral point.
struct Cluster {
  int begin = 0;
  int size = 0;
  double representative = 0.0;
};

/// Eigendecomposition A = basis * diag(eigenvalues) * basis^* with eigenvalues
/// ascending and tolerance-based clustering; cluster i realizes the spectral
/// projection P_i = sum of v v^* over its columns.
struct EigenSystem {
  Eigen::VectorXd eigenvalues;
  Matrix basis;
  double residual = 0.0;
  double cluster_tolerance = 0.0;
  std::vector<Cluster> clusters;

  int dim() const noexcept { return static_cast<int>(eigenvalues.size()); }
  std::vector<double> representatives() const;
  Matrix projection(int cluster) const;
  /// Reassembles basis * diag(eigenvalues) * basis^*.
  Matrix reconstruct() const;

  /// Builds a system from given spectral data (basis assumed unitary).
  static EigenSystem from_spectral(const Eigen::VectorXd& values, const Matrix& basis,
                                   std::optional<double> cluster_tol = std::nullopt);
};

/// 1e-8 * max(1, spectral range).
double default_cluster_tolerance(const Eigen::VectorXd& eigenvalues);

/// Single-linkage clustering of ascending values with gap <= tol.
std::vector<Cluster> cluster_eigenvalues(const Eigen::VectorXd& ascending, double tol);

/// Cyclic Jacobi eigensolver for Hermitian matrices (d <= 256).
EigenSystem eig_hermitian(const HermitianMatrix& a,
                          std::optional<double> cluster_tol = std::nullopt);

/// f(A) = basis * diag(f(lambda_i)) * basis^*.
Matrix apply_function(const FunctionFamily& f, const EigenSystem& e);

/// The linear functional playing the role of the trace.
struct TraceModel {
  enum class Kind { standard, weighted_diagonal };
  Kind kind = Kind::standard;
  /// weighted_diagonal only: positive, summing to one.
  std::vector<double> weights;

  static TraceModel standard() { return {}; }
  static TraceModel weighted(std::vector<double> weights);
  /// Weights 1/d: the normalized trace of a d-point probability space.
  static TraceModel uniform(int d);
};

/// Schatten p-norm (1 <= p <= inf) under the trace model. The weighted model
/// accepts diagonal matrices only.
double schatten_norm(const Matrix& x, double p, const TraceModel& model = TraceModel::standard());

/// Same norm for the diagonal matrix diag(d), without forming it.
double schatten_norm_diagonal(const Eigen::VectorXcd& diag, double p,
                              const TraceModel& model = TraceModel::standard());

/// Singular values, descending.
Eigen::VectorXd singular_values(const Matrix& x);

cplx trace(const Matrix& x, const TraceModel& model = TraceModel::standard());

/// Frobenius norm of (a - b) divided by max(floor, |b|_F).
double relative_difference(const Matrix& a, const Matrix& b, double floor = 1e-300);

}  // namespace moilab
