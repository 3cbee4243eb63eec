#include <doctest.h>

#include <cmath>

#include "moilab/error.hpp"
#include "moilab/harness.hpp"
#include "moilab/matrix_io.hpp"
#include "moilab/spectral.hpp"
#include "oracles.hpp"

using namespace moilab;

TEST_CASE("eigendecomposition reconstructs and matches Eigen's solver") {
  for (int d : {1, 2, 5, 12}) {
    const HermitianMatrix a = random_hermitian(d, 100 + static_cast<std::uint64_t>(d));
    const EigenSystem e = eig_hermitian(a);
    CHECK((e.reconstruct() - a.matrix()).norm() <= 1e-12 * std::max(1.0, a.matrix().norm()));
    CHECK((e.basis.adjoint() * e.basis - Matrix::Identity(d, d)).norm() <= 1e-12);
    const Eigen::VectorXd ref = Eigen::SelfAdjointEigenSolver<Matrix>(a.matrix()).eigenvalues();
    CHECK((e.eigenvalues - ref).cwiseAbs().maxCoeff() <= 1e-12);
    for (int i = 1; i < d; ++i) CHECK(e.eigenvalues(i - 1) <= e.eigenvalues(i));
  }
}

TEST_CASE("degenerate spectra are clustered and projections are exact") {
  const HermitianMatrix u = random_hermitian(4, 9);
  const Matrix basis = eig_hermitian(u).basis;
  Eigen::VectorXd v(4);
  v << -1.0, 0.5, 0.5, 2.0;
  const HermitianMatrix a(Matrix(basis * v.cast<cplx>().asDiagonal() * basis.adjoint()), 1e-10);
  const EigenSystem e = eig_hermitian(a);
  REQUIRE(e.clusters.size() == 3);
  CHECK(e.clusters[1].size == 2);
  Matrix sum = Matrix::Zero(4, 4);
  for (int i = 0; i < 3; ++i) {
    const Matrix p = e.projection(i);
    CHECK((p * p - p).norm() <= 1e-12);
    sum += p;
  }
  CHECK((sum - Matrix::Identity(4, 4)).norm() <= 1e-12);
}

TEST_CASE("HermitianMatrix rejects non-Hermitian and non-finite input") {
  Matrix m(2, 2);
  m << 1.0, cplx(0.0, 1.0), cplx(0.0, 1.0), 1.0;
  CHECK_THROWS_AS(HermitianMatrix{m}, ContractViolation);
  Matrix r(2, 3);
  r.setZero();
  CHECK_THROWS_AS(HermitianMatrix{r}, ContractViolation);
  Matrix n = Matrix::Identity(2, 2);
  n(0, 0) = std::nan("");
  CHECK_THROWS_AS(HermitianMatrix{n}, ContractViolation);
}

TEST_CASE("apply_function agrees with the matrix exponential oracle") {
  const HermitianMatrix a = random_hermitian(6, 3);
  const Matrix f = apply_function(families::exponential(), eig_hermitian(a));
  CHECK((f - oracle::expm(a.matrix())).norm() <= 1e-12 * f.norm());
}

TEST_CASE("Schatten norms match a long-double SVD") {
  const Matrix x = random_complex(7, 4);
  for (double p : {1.0, 1.5, 2.0, 3.0, std::numeric_limits<double>::infinity()}) {
    CAPTURE(p);
    CHECK(schatten_norm(x, p) == doctest::Approx(oracle::schatten(x, p)).epsilon(1e-12));
  }
  CHECK(schatten_norm(x, 2.0) == doctest::Approx(x.norm()).epsilon(1e-13));
}

TEST_CASE("weighted diagonal trace model") {
  const TraceModel m = TraceModel::uniform(4);
  Matrix d = Matrix::Zero(4, 4);
  d.diagonal() << 1.0, -2.0, 3.0, 4.0;
  CHECK(std::abs(trace(d, m) - cplx(1.5, 0)) < 1e-15);
  // (sum_k |d_k|^p / 4)^{1/p}
  CHECK(schatten_norm(d, 2.0, m) == doctest::Approx(std::sqrt((1 + 4 + 9 + 16) / 4.0)));
  Eigen::VectorXcd diag = d.diagonal();
  CHECK(schatten_norm_diagonal(diag, 3.0, m) == doctest::Approx(schatten_norm(d, 3.0, m)).epsilon(1e-14));
  Matrix off = d;
  off(0, 1) = 1.0;
  CHECK_THROWS_AS(schatten_norm(off, 2.0, m), ContractViolation);
  CHECK_THROWS(TraceModel::weighted({0.5, 0.6}));
}

TEST_CASE("matrix files: JSON and CSV round trips, parse errors carry line numbers") {
  const Matrix x = random_complex(3, 77);
  const Matrix j = matrix_from_json(matrix_to_json(x));
  CHECK((j - x).norm() == 0.0);
  const Matrix c = matrix_from_csv(matrix_to_csv(x));
  CHECK((c - x).norm() == 0.0);
  CHECK((matrix_from_json(nlohmann::json::parse("[[1, 2], [3, [4, 5]]]")) -
         (Matrix(2, 2) << 1.0, 2.0, 3.0, cplx(4.0, 5.0)).finished())
            .norm() == 0.0);
  try {
    matrix_from_csv("# header\n1,0,2,0\n3,0,oops,0\n", "m.csv");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("m.csv:3") != std::string::npos);
  }
  CHECK_THROWS_AS(matrix_from_csv("1,0\n2,0\n", "x"), ParseError);
  CHECK_THROWS_AS(matrix_from_json(nlohmann::json::parse("[[1,2],[3]]")), ParseError);
  CHECK_THROWS_AS(load_matrix("/nonexistent/file.json"), ParseError);
}
