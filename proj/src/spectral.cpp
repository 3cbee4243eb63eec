#include "moilab/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "moilab/error.hpp"

namespace moilab {

HermitianMatrix::HermitianMatrix(Matrix m, double tol) {
  if (m.rows() != m.cols() || m.rows() < 1) {
    throw ContractViolation("Hermitian matrix must be square with dimension >= 1");
  }
  if (!m.allFinite()) throw ContractViolation("Hermitian matrix has non-finite entries");
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  const double asym = (m - m.adjoint()).cwiseAbs().maxCoeff();
  if (asym > tol * scale) {
    throw ContractViolation("matrix is not Hermitian (max |A - A^*| = " + std::to_string(asym) + ")");
  }
  m_ = 0.5 * (m + m.adjoint());
}

HermitianMatrix HermitianMatrix::zero(int d) { return HermitianMatrix(Matrix::Zero(d, d), Trusted{}); }

HermitianMatrix HermitianMatrix::identity(int d) {
  return HermitianMatrix(Matrix::Identity(d, d), Trusted{});
}

HermitianMatrix HermitianMatrix::diagonal(const std::vector<double>& values) {
  if (values.empty()) throw ContractViolation("diagonal matrix needs at least one entry");
  Matrix m = Matrix::Zero(static_cast<Eigen::Index>(values.size()), static_cast<Eigen::Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) throw ContractViolation("diagonal entry is not finite");
    m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = values[i];
  }
  return HermitianMatrix(std::move(m), Trusted{});
}

HermitianMatrix HermitianMatrix::operator+(const HermitianMatrix& other) const {
  if (other.dim() != dim()) throw DimensionMismatch("Hermitian sum of different dimensions");
  return HermitianMatrix(m_ + other.m_, Trusted{});
}

HermitianMatrix HermitianMatrix::operator-(const HermitianMatrix& other) const {
  if (other.dim() != dim()) throw DimensionMismatch("Hermitian difference of different dimensions");
  return HermitianMatrix(m_ - other.m_, Trusted{});
}

HermitianMatrix HermitianMatrix::operator*(double s) const { return HermitianMatrix(m_ * s, Trusted{}); }

std::vector<double> EigenSystem::representatives() const {
  std::vector<double> r;
  r.reserve(clusters.size());
  for (const auto& c : clusters) r.push_back(c.representative);
  return r;
}

Matrix EigenSystem::projection(int cluster) const {
  const Cluster& c = clusters.at(static_cast<std::size_t>(cluster));
  const auto cols = basis.middleCols(c.begin, c.size);
  return cols * cols.adjoint();
}

Matrix EigenSystem::reconstruct() const {
  return basis * eigenvalues.cast<cplx>().asDiagonal() * basis.adjoint();
}

double default_cluster_tolerance(const Eigen::VectorXd& eigenvalues) {
  if (eigenvalues.size() == 0) return 1e-8;
  const double range = eigenvalues.maxCoeff() - eigenvalues.minCoeff();
  return 1e-8 * std::max(1.0, range);
}

std::vector<Cluster> cluster_eigenvalues(const Eigen::VectorXd& ascending, double tol) {
  std::vector<Cluster> out;
  const auto n = static_cast<int>(ascending.size());
  int start = 0;
  for (int i = 1; i <= n; ++i) {
    if (i == n || ascending(i) - ascending(i - 1) > tol) {
      const int size = i - start;
      const double rep = size == 1 ? ascending(start) : ascending.segment(start, size).mean();
      out.push_back({start, size, rep});
      start = i;
    }
  }
  return out;
}

EigenSystem EigenSystem::from_spectral(const Eigen::VectorXd& values, const Matrix& basis,
                                       std::optional<double> cluster_tol) {
  if (basis.rows() != values.size() || basis.cols() != values.size()) {
    throw DimensionMismatch("basis shape does not match number of eigenvalues");
  }
  std::vector<int> order(static_cast<std::size_t>(values.size()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return values(a) < values(b); });
  EigenSystem e;
  e.eigenvalues.resize(values.size());
  e.basis.resize(basis.rows(), basis.cols());
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    e.eigenvalues(k) = values(order[i]);
    e.basis.col(k) = basis.col(order[i]);
  }
  e.cluster_tolerance = cluster_tol.value_or(default_cluster_tolerance(e.eigenvalues));
  e.clusters = cluster_eigenvalues(e.eigenvalues, e.cluster_tolerance);
  e.residual = 0.0;
  return e;
}

EigenSystem eig_hermitian(const HermitianMatrix& input, std::optional<double> cluster_tol) {
  const int d = input.dim();
  if (d > 256) throw ParameterError("eig_hermitian supports dimension up to 256");
  Matrix a = input.matrix();
  Matrix v = Matrix::Identity(d, d);
  const double norm = std::max(a.norm(), std::numeric_limits<double>::min());

  auto off_norm = [&] {
    double s = 0.0;
    for (int j = 0; j < d; ++j)
      for (int i = 0; i < d; ++i)
        if (i != j) s += std::norm(a(i, j));
    return std::sqrt(s);
  };

  constexpr int kMaxSweeps = 100;
  int sweep = 0;
  double off = off_norm();
  while (off > 1e-15 * norm && sweep < kMaxSweeps) {
    for (int p = 0; p < d - 1; ++p) {
      for (int q = p + 1; q < d; ++q) {
        const cplx apq = a(p, q);
        const double r = std::abs(apq);
        if (r <= 1e-300) continue;
        const double app = a(p, p).real();
        const double aqq = a(q, q).real();
        // phase D = diag(1, e^{-i arg apq}) makes the pair real, then a real
        // rotation [[c, s], [-s, c]] annihilates it
        const double theta = (aqq - app) / (2.0 * r);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        const cplx phase = std::conj(apq) / r;
        const cplx u_pp = c;
        const cplx u_pq = s;
        const cplx u_qp = -s * phase;
        const cplx u_qq = c * phase;
        for (int k = 0; k < d; ++k) {
          const cplx akp = a(k, p);
          const cplx akq = a(k, q);
          a(k, p) = akp * u_pp + akq * u_qp;
          a(k, q) = akp * u_pq + akq * u_qq;
        }
        for (int k = 0; k < d; ++k) {
          const cplx apk = a(p, k);
          const cplx aqk = a(q, k);
          a(p, k) = std::conj(u_pp) * apk + std::conj(u_qp) * aqk;
          a(q, k) = std::conj(u_pq) * apk + std::conj(u_qq) * aqk;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        a(p, p) = a(p, p).real();
        a(q, q) = a(q, q).real();
        for (int k = 0; k < d; ++k) {
          const cplx vkp = v(k, p);
          const cplx vkq = v(k, q);
          v(k, p) = vkp * u_pp + vkq * u_qp;
          v(k, q) = vkp * u_pq + vkq * u_qq;
        }
      }
    }
    ++sweep;
    off = off_norm();
  }

  Eigen::VectorXd values(d);
  for (int i = 0; i < d; ++i) values(i) = a(i, i).real();
  EigenSystem e = EigenSystem::from_spectral(values, v, cluster_tol);
  if (!cluster_tol) {
    e.cluster_tolerance = default_cluster_tolerance(e.eigenvalues);
    e.clusters = cluster_eigenvalues(e.eigenvalues, e.cluster_tolerance);
  }
  e.residual = (input.matrix() - e.reconstruct()).norm();
  if (off > 1e-15 * norm) {
    throw NumericalError("Jacobi iteration did not converge in " + std::to_string(kMaxSweeps) +
                             " sweeps (off-diagonal norm " + std::to_string(off) + ")",
                         e.residual);
  }
  return e;
}

Matrix apply_function(const FunctionFamily& f, const EigenSystem& e) {
  Eigen::VectorXcd values(e.dim());
  for (int i = 0; i < e.dim(); ++i) values(i) = f.eval(0, e.eigenvalues(i));
  return e.basis * values.asDiagonal() * e.basis.adjoint();
}

TraceModel TraceModel::weighted(std::vector<double> weights) {
  if (weights.empty()) throw ParameterError("weighted trace model needs weights");
  double sum = 0.0;
  for (double w : weights) {
    if (!(w > 0.0) || !std::isfinite(w)) throw ParameterError("trace weights must be positive");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-12) throw ParameterError("trace weights must sum to one");
  TraceModel m;
  m.kind = Kind::weighted_diagonal;
  m.weights = std::move(weights);
  return m;
}

TraceModel TraceModel::uniform(int d) {
  if (d < 1) throw ParameterError("uniform trace model needs d >= 1");
  TraceModel m;
  m.kind = Kind::weighted_diagonal;
  m.weights.assign(static_cast<std::size_t>(d), 1.0 / d);
  return m;
}

namespace {

void check_model_dim(const Matrix& x, const TraceModel& model) {
  if (x.rows() != x.cols()) throw DimensionMismatch("trace of a non-square matrix");
  if (model.kind == TraceModel::Kind::weighted_diagonal) {
    if (static_cast<std::size_t>(x.rows()) != model.weights.size()) {
      throw DimensionMismatch("matrix dimension does not match trace weights");
    }
    for (Eigen::Index j = 0; j < x.cols(); ++j)
      for (Eigen::Index i = 0; i < x.rows(); ++i)
        if (i != j && x(i, j) != cplx(0.0)) {
          throw ContractViolation("weighted diagonal trace model accepts diagonal matrices only");
        }
  }
}

}  // namespace

Eigen::VectorXd singular_values(const Matrix& x) {
  const Matrix gram = x.adjoint() * x;
  const EigenSystem e = eig_hermitian(HermitianMatrix(gram, 1e-10));
  Eigen::VectorXd s(e.dim());
  for (int i = 0; i < e.dim(); ++i) s(i) = std::sqrt(std::max(0.0, e.eigenvalues(e.dim() - 1 - i)));
  return s;
}

namespace {

double weighted_power_norm(const Eigen::VectorXd& sigma, const std::vector<double>* w, double p) {
  if (std::isinf(p)) return sigma.size() ? sigma.maxCoeff() : 0.0;
  const double smax = sigma.size() ? sigma.maxCoeff() : 0.0;
  if (smax == 0.0) return 0.0;
  // scaled to avoid overflow for large p
  double acc = 0.0;
  for (Eigen::Index i = 0; i < sigma.size(); ++i) {
    acc += (w ? (*w)[static_cast<std::size_t>(i)] : 1.0) * std::pow(sigma(i) / smax, p);
  }
  return smax * std::pow(acc, 1.0 / p);
}

}  // namespace

double schatten_norm(const Matrix& x, double p, const TraceModel& model) {
  if (!(p >= 1.0)) throw ParameterError("Schatten exponent must satisfy p >= 1");
  if (!x.allFinite()) throw ContractViolation("Schatten norm of a non-finite matrix");
  if (model.kind == TraceModel::Kind::weighted_diagonal) {
    check_model_dim(x, model);
    return weighted_power_norm(x.diagonal().cwiseAbs(), &model.weights, p);
  }
  if (x.size() == 0) return 0.0;
  return weighted_power_norm(singular_values(x), nullptr, p);
}

double schatten_norm_diagonal(const Eigen::VectorXcd& diag, double p, const TraceModel& model) {
  if (!(p >= 1.0)) throw ParameterError("Schatten exponent must satisfy p >= 1");
  if (!diag.allFinite()) throw ContractViolation("Schatten norm of a non-finite matrix");
  if (model.kind == TraceModel::Kind::weighted_diagonal) {
    if (static_cast<std::size_t>(diag.size()) != model.weights.size()) {
      throw DimensionMismatch("matrix dimension does not match trace weights");
    }
    return weighted_power_norm(diag.cwiseAbs(), &model.weights, p);
  }
  return weighted_power_norm(diag.cwiseAbs(), nullptr, p);
}

cplx trace(const Matrix& x, const TraceModel& model) {
  check_model_dim(x, model);
  if (model.kind == TraceModel::Kind::standard) return x.trace();
  cplx acc = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) acc += model.weights[static_cast<std::size_t>(i)] * x(i, i);
  return acc;
}

double relative_difference(const Matrix& a, const Matrix& b, double floor) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw DimensionMismatch("shape mismatch");
  return (a - b).norm() / std::max(floor, b.norm());
}

}  // namespace moilab
