#include <doctest.h>

#include <cmath>

#include "moilab/error.hpp"
#include "moilab/harness.hpp"
#include "moilab/taylor.hpp"
#include "oracles.hpp"

using namespace moilab;

namespace {

// f(X) through Eigen's own eigensolver, for test-side finite differences.
Matrix fun(const std::function<double(double)>& f, const Matrix& x) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(x);
  const Eigen::VectorXd v = es.eigenvalues().unaryExpr(f);
  return es.eigenvectors() * v.cast<cplx>().asDiagonal() * es.eigenvectors().adjoint();
}

// k-th central difference of s -> f(A + sB) at t, one Richardson step.
Matrix fd(const std::function<double(double)>& f, const Matrix& a, const Matrix& b, int k, double t, double h) {
  auto plain = [&](double step) {
    Matrix acc = Matrix::Zero(a.rows(), a.cols());
    double binom = 1.0;
    for (int j = 0; j <= k; ++j) {
      const double s = t + (k / 2.0 - j) * step;
      acc += ((j % 2) ? -binom : binom) * fun(f, a + s * b);
      binom = binom * (k - j) / (j + 1);
    }
    return Matrix(acc / std::pow(step, k));
  };
  return (4.0 * plain(h / 2) - plain(h)) / 3.0;
}

double gauss(double x) { return std::exp(-x * x); }
double rat(double x) { return 1.0 / (1.0 + x * x); }

}  // namespace

TEST_CASE("derivatives of exp match the block-matrix exponential") {
  for (int d : {2, 6, 16}) {
    const HermitianMatrix a = random_hermitian(d, 10 + static_cast<std::uint64_t>(d));
    const HermitianMatrix b = random_hermitian(d, 20 + static_cast<std::uint64_t>(d), 1.0);
    for (int k = 1; k <= 3; ++k) {
      const DerivativeResult r = gateaux_derivative(families::exponential(), a, b, k, 0.25);
      const Matrix ref = oracle::exp_derivative(a.matrix(), b.matrix(), k, 0.25);
      CAPTURE(d);
      CAPTURE(k);
      CHECK(relative_difference(r.value, ref, 1.0) <= 1e-10);
      CHECK_FALSE(r.warnings.empty());
    }
  }
}

TEST_CASE("derivatives of bounded families match test-side finite differences") {
  const HermitianMatrix a = random_hermitian(5, 1);
  const HermitianMatrix b = random_hermitian(5, 2, 1.0);
  struct Case {
    FunctionFamily f;
    double (*g)(double);
  };
  for (const Case& c : {Case{families::gaussian(), gauss}, Case{families::rational(), rat}}) {
    for (int k = 1; k <= 3; ++k) {
      const DerivativeResult r = gateaux_derivative(c.f, a, b, k, -0.1);
      CHECK(r.warnings.empty());
      CHECK(relative_difference(r.value, fd(c.g, a.matrix(), b.matrix(), k, -0.1, 0.02), 1.0) <= 1e-5);
    }
  }
}

TEST_CASE("library finite-difference oracle converges at second order") {
  const HermitianMatrix a = random_hermitian(4, 8);
  const HermitianMatrix b = random_hermitian(4, 9, 1.0);
  const auto f = families::gaussian();
  const Matrix exact = gateaux_derivative(f, a, b, 2, 0.0).value;
  const double e1 = relative_difference(finite_difference_oracle(f, a, b, 2, 0.0, 0.04, 0), exact, 1.0);
  const double e2 = relative_difference(finite_difference_oracle(f, a, b, 2, 0.0, 0.02, 0), exact, 1.0);
  CHECK(std::log2(e1 / e2) == doctest::Approx(2.0).epsilon(0.1));
  CHECK(relative_difference(finite_difference_oracle(f, a, b, 2, 0.0, 0.04, 3), exact, 1.0) <= 1e-9);
}

TEST_CASE("Taylor remainder of exp matches the block-exponential Taylor polynomial") {
  const HermitianMatrix a = random_hermitian(4, 31);
  const HermitianMatrix b = random_hermitian(4, 32, 1.0);
  const Matrix full = oracle::expm((a + b).matrix());
  for (int n = 1; n <= 3; ++n) {
    Matrix poly = Matrix::Zero(4, 4);
    for (int k = 0; k < n; ++k) {
      poly += (k == 0 ? oracle::expm(a.matrix()) : oracle::exp_derivative(a.matrix(), b.matrix(), k, 0.0)) /
              std::tgamma(k + 1.0);
    }
    const RemainderResult r = taylor_remainder(families::exponential(), a, b, n);
    CHECK(r.relative_difference <= 1e-8);
    CHECK(relative_difference(r.value, full - poly, 1.0) <= 1e-10);
  }
}

TEST_CASE("remainder of a polynomial of degree n is exactly its top term") {
  // For x^2 and n = 2 the remainder is B^2.
  const HermitianMatrix a = random_hermitian(3, 4);
  const HermitianMatrix b = random_hermitian(3, 5);
  const RemainderResult r = taylor_remainder(families::monomial(2), a, b, 2);
  CHECK(relative_difference(r.value, b.matrix() * b.matrix(), 1.0) <= 1e-12);
}

TEST_CASE("perturbation identities") {
  const HermitianMatrix a = random_hermitian(4, 60);
  const HermitianMatrix c = random_hermitian(4, 61);
  for (const auto& f : {families::gaussian(), families::exponential(), families::rational()}) {
    CHECK(perturbation_first_order(f, a, c) <= 1e-9);
    const std::vector<HermitianMatrix> others{random_hermitian(4, 62), random_hermitian(4, 63)};
    const std::vector<Matrix> x{random_complex(4, 64), random_complex(4, 65)};
    for (int k = 1; k <= 2; ++k) {
      const std::vector<HermitianMatrix> o(others.begin(), others.begin() + k);
      const std::vector<Matrix> xs(x.begin(), x.begin() + k);
      for (int j = 1; j <= k + 1; ++j) CHECK(perturbation_higher_order(f, a, c, o, xs, j) <= 1e-8);
    }
    for (int j = 1; j <= 2; ++j) CHECK(telescoping_check(f, a, c, 2, 0.6, j) <= 1e-8);
  }
  CHECK_THROWS_AS(perturbation_higher_order(families::gaussian(), a, c, {a}, {}, 1), ParameterError);
}

TEST_CASE("first-order identity reproduces exp(A) - exp(C) from the oracle") {
  const HermitianMatrix a = random_hermitian(3, 70);
  const HermitianMatrix c = random_hermitian(3, 71);
  MOIOperands ops;
  ops.operators = {eig_hermitian(a), eig_hermitian(c)};
  ops.arguments = {(a - c).matrix()};
  const Matrix t = moi_projection_sum(Symbol::divided_difference(families::exponential(), 1), ops).value;
  CHECK(relative_difference(t, oracle::expm(a.matrix()) - oracle::expm(c.matrix()), 1.0) <= 1e-11);
}

TEST_CASE("continuity modulus is linear in t and below the telescoped bound") {
  const HermitianMatrix a = random_hermitian(4, 90);
  const HermitianMatrix b = random_hermitian(4, 91, 1.0);
  const std::vector<double> grid{0.0, 1e-2, -1e-2, 1e-3, -1e-3, 1e-4, 1e-5};
  const ContinuityReport r = continuity_probe(families::gaussian(), a, b, 2, grid, 1, 2.0, true);
  CHECK(r.bound_holds);
  CHECK(r.slope == doctest::Approx(1.0).epsilon(0.1));
  CHECK_THROWS_AS(continuity_probe(families::gaussian(), a, b, 2, {1e-3, 1e-4}), ParameterError);
}

TEST_CASE("counterexample table matches a direct evaluation") {
  const double p = 2.0;
  const std::vector<int> dims{16, 64, 256, 1024, 4096};
  const DivergenceTable t = lp_counterexample_demo(p, dims, 1.0);
  REQUIRE(t.rows.size() == dims.size());
  // f(x) = 1/(1+x) near a = 1: f'(x) = -1/(1+x)^2.
  auto r = [&](int d, bool heavy) {
    const double tt = 1.0 / d;
    double acc = 0.0;
    for (int k = 1; k <= d; ++k) {
      const double b = heavy ? std::pow(static_cast<double>(k) / d, -1.0 / (1.5 * p)) : 1.0;
      const double diff = (-1.0 / std::pow(2.0 + tt * b, 2) + 1.0 / 4.0) * b / tt;
      acc += std::pow(std::abs(diff), p) / d;
    }
    return std::pow(acc, 1.0 / p);
  };
  for (std::size_t i = 0; i < dims.size(); ++i) {
    CHECK(t.rows[i].r_heavy == doctest::Approx(r(dims[i], true)).epsilon(1e-9));
    CHECK(t.rows[i].r_bounded == doctest::Approx(r(dims[i], false)).epsilon(1e-9));
  }
  for (double q : t.heavy_ratios()) CHECK(q >= 1.2);
  CHECK(std::abs(t.bounded_ratios().back() - 1.0) <= 0.05);
  CHECK(t.to_csv().rfind("d,t,r_heavy,r_bounded\n", 0) == 0);
  CHECK_THROWS_AS(lp_counterexample_demo(1.0, dims), ParameterError);
}
