#include <doctest.h>

#include <cmath>
#include <cstdlib>

#include "moilab/error.hpp"
#include "moilab/harness.hpp"
#include "moilab/moi.hpp"
#include "moilab/rng.hpp"
#include "oracles.hpp"

using namespace moilab;

namespace {

struct Setup {
  std::vector<Matrix> raw;
  MOIOperands ops;
};

Setup random_setup(int d, int n, std::uint64_t seed) {
  Setup s;
  for (int i = 0; i <= n; ++i) {
    const HermitianMatrix h = random_hermitian(d, seed + 2 * static_cast<std::uint64_t>(i));
    s.raw.push_back(h.matrix());
    s.ops.operators.push_back(eig_hermitian(h));
  }
  for (int i = 0; i < n; ++i) s.ops.arguments.push_back(random_complex(d, seed + 2 * static_cast<std::uint64_t>(i) + 1));
  return s;
}

Matrix degenerate(int d, std::uint64_t seed) {
  const Matrix basis = eig_hermitian(random_hermitian(d, seed)).basis;
  Eigen::VectorXd v(d);
  for (int i = 0; i < d; ++i) v(i) = (i < d / 2) ? 0.25 : -0.5 + 0.1 * i;
  return basis * v.cast<cplx>().asDiagonal() * basis.adjoint();
}

std::function<cplx(const std::vector<double>&)> dd_oracle(const FunctionFamily& f) {
  return [f](const std::vector<double>& l) { return divided_difference(f, l); };
}

}  // namespace

TEST_CASE("projection sum matches the unclustered brute-force sum") {
  const std::vector<FunctionFamily> fs{families::gaussian(), families::exponential(), families::fourier(1.7),
                                       families::rational()};
  for (int d = 1; d <= 4; ++d) {
    for (int n = 1; n <= 3; ++n) {
      const Setup s = random_setup(d, n, 1000 * d + 10 * n);
      for (const auto& f : fs) {
        const Matrix got = moi_projection_sum(Symbol::divided_difference(f, n), s.ops).value;
        const Matrix ref = oracle::brute_force_moi(dd_oracle(f), s.raw, s.ops.arguments);
        CAPTURE(d);
        CAPTURE(n);
        CAPTURE(f.id());
        CHECK(relative_difference(got, ref, 1.0) <= 1e-10);
      }
    }
  }
}

TEST_CASE("repeated eigenvalues: clustered sum equals the brute-force sum") {
  for (int n = 1; n <= 3; ++n) {
    Setup s = random_setup(4, n, 55 + static_cast<std::uint64_t>(n));
    for (int i = 0; i <= n; i += 2) {
      s.raw[static_cast<std::size_t>(i)] = degenerate(4, 200 + static_cast<std::uint64_t>(i));
      s.ops.operators[static_cast<std::size_t>(i)] = eig_hermitian(HermitianMatrix(s.raw[static_cast<std::size_t>(i)], 1e-10));
    }
    const auto f = families::gaussian();
    const MOIResult r = moi_projection_sum(Symbol::divided_difference(f, n), s.ops);
    CHECK(r.diagnostics.cluster_counts[0] < 4);
    CHECK(relative_difference(r.value, oracle::brute_force_moi(dd_oracle(f), s.raw, s.ops.arguments), 1.0) <= 1e-10);
  }
}

TEST_CASE("first order integral is the Schur product in the eigenbases") {
  const Setup s = random_setup(5, 1, 42);
  const auto f = families::exponential();
  const Matrix got = moi_projection_sum(Symbol::divided_difference(f, 1), s.ops).value;
  const auto& e0 = s.ops.operators[0];
  const auto& e1 = s.ops.operators[1];
  Matrix c = e0.basis.adjoint() * s.ops.arguments[0] * e1.basis;
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j)
      c(i, j) *= divided_difference(f, std::vector<double>{e0.eigenvalues(i), e1.eigenvalues(j)});
  CHECK(relative_difference(got, e0.basis * c * e1.basis.adjoint(), 1.0) <= 1e-12);
}

TEST_CASE("factorized and projection forms agree for exponential symbols") {
  for (int n = 1; n <= 3; ++n) {
    const Setup s = random_setup(4, n, 300 + static_cast<std::uint64_t>(n));
    FactorTerm term{cplx(0.5, -0.25), {}};
    for (int i = 0; i <= n; ++i) term.factors.push_back(families::fourier(0.8 - 0.6 * i));
    const Symbol sym = Symbol::factorized({term});
    const Matrix a = moi_projection_sum(sym, s.ops).value;
    const Matrix b = moi_factorized(sym, s.ops).value;
    CHECK(relative_difference(a, b, 1.0) <= 1e-9);
    const auto phi = [&](const std::vector<double>& l) { return sym(l); };
    CHECK(relative_difference(a, oracle::brute_force_moi(phi, s.raw, s.ops.arguments), 1.0) <= 1e-10);
  }
}

TEST_CASE("simplex factorization of the Fourier divided difference") {
  for (int n = 1; n <= 3; ++n) {
    const Symbol fac = fourier_divided_difference_symbol(1.3, n, 16);
    const Symbol dd = Symbol::divided_difference(families::fourier(1.3), n);
    for (const std::vector<double>& l :
         {std::vector<double>{0.2, -0.5, 1.1, 0.7}, std::vector<double>{0.4, 0.4, 0.4, 0.4}}) {
      const std::vector<double> x(l.begin(), l.begin() + n + 1);
      CHECK(std::abs(fac(x) - dd(x)) <= 1e-12);
    }
    const Setup s = random_setup(3, n, 900 + static_cast<std::uint64_t>(n));
    const Matrix proj = moi_projection_sum(dd, s.ops).value;
    CHECK(relative_difference(moi_factorized(fac, s.ops).value, proj, 1.0) <= 1e-10);
    CHECK(fac.factorized_norm_bound() <= std::pow(1.3, n) / std::tgamma(n + 1.0) * (1 + 1e-12));
  }
}

TEST_CASE("discretized sums converge on dyadic spectra") {
  const int n = 2;
  SplitMix64 rng(17);
  MOIOperands ops;
  std::vector<Matrix> raw;
  for (int i = 0; i <= n; ++i) {
    Eigen::VectorXd ev(4);
    for (int k = 0; k < 4; ++k) ev(k) = std::floor(rng.uniform() * 32.0 - 16.0) / 16.0 + 1.0 / 16.0 - std::ldexp(1.0, -12);
    std::sort(ev.data(), ev.data() + 4);
    const Matrix basis = eig_hermitian(random_hermitian(4, rng.next())).basis;
    ops.operators.push_back(EigenSystem::from_spectral(ev, basis));
  }
  for (int i = 0; i < n; ++i) ops.arguments.push_back(random_complex(4, rng.next()));
  const Symbol sym = Symbol::divided_difference(families::gaussian(), n);
  const Matrix exact = moi_projection_sum(sym, ops).value;
  double prev = -1.0;
  for (int m = 16; m <= 4096; m *= 2) {
    const double err = (moi_discretized(sym, ops, m, 4 * m).value - exact).norm();
    if (prev > 0.0) CHECK(err <= 0.75 * prev);
    prev = err;
  }
  CHECK(prev <= 1e-8);
  CHECK_THROWS_AS(moi_discretized(sym, ops, 16, 4), WindowError);
}

TEST_CASE("operands are validated") {
  Setup s = random_setup(3, 2, 5);
  const Symbol sym = Symbol::divided_difference(families::gaussian(), 2);
  MOIOperands bad = s.ops;
  bad.arguments.pop_back();
  CHECK_THROWS_AS(moi_projection_sum(sym, bad), ContractViolation);
  bad = s.ops;
  bad.arguments[0] = Matrix::Zero(2, 2);
  CHECK_THROWS_AS(moi_projection_sum(sym, bad), ContractViolation);
  const auto plain = families::scalar("plain", [](double x) { return cplx(x, 0.0); }, 1.0, true);
  CHECK_THROWS_AS(Symbol::divided_difference(plain, 2), UnsupportedOrderError);
  CHECK_THROWS_AS(moi_projection_sum(Symbol::divided_difference(families::exponential(), 1), s.ops), ContractViolation);
}

TEST_CASE("norm ratios stay under the factorization bound") {
  Setup s = random_setup(5, 2, 71);
  s.ops.exponents = {4.0, 4.0};
  const NormReport r = moi_norm_report(fourier_divided_difference_symbol(2.0, 2, 12), s.ops, 2.0);
  REQUIRE(r.bound.has_value());
  CHECK(r.ratio <= *r.bound);
  const Matrix t = moi_projection_sum(fourier_divided_difference_symbol(2.0, 2, 12), s.ops).value;
  CHECK(r.numerator == doctest::Approx(oracle::schatten(t, 2.0)).epsilon(1e-10));
  CHECK(r.denominator == doctest::Approx(oracle::schatten(s.ops.arguments[0], 4.0) *
                                         oracle::schatten(s.ops.arguments[1], 4.0))
                             .epsilon(1e-10));
  s.ops.exponents = {3.0, 4.0};
  CHECK_THROWS_AS(moi_norm_report(Symbol::divided_difference(families::gaussian(), 2), s.ops, 2.0), ParameterError);
}

TEST_CASE("closing trace: rotated product form agrees with the direct form") {
  const Setup s = random_setup(4, 2, 404);
  const Matrix closing = random_complex(4, 405);
  const Symbol fac = fourier_divided_difference_symbol(0.9, 2, 10);
  const cplx direct = (moi_projection_sum(fac, s.ops).value * closing).trace();
  CHECK(std::abs(moi_trace(fac, s.ops, closing) - direct) <= 1e-10 * std::max(1.0, std::abs(direct)));
}

TEST_CASE("diagonal restriction sets the last variable to the first") {
  const Symbol base = Symbol::divided_difference(families::gaussian(), 2);
  const Symbol r = Symbol::diagonal_restricted(base);
  CHECK(r.arity() == 2);
  const std::vector<double> l{0.3, -0.4};
  CHECK(r(l) == base(std::vector<double>{0.3, -0.4, 0.3}));
  const Symbol fac = fourier_divided_difference_symbol(1.1, 2, 8);
  const Symbol rf = Symbol::diagonal_restricted(fac);
  CHECK(std::abs(rf.restricted_as_factorized()(l) - rf(l)) <= 1e-14);
}

TEST_CASE("commutative model multiplies pointwise") {
  const Symbol sym = Symbol::divided_difference(families::exponential(), 1);
  const auto out = moi_diagonal(sym, {{0.0, 1.0}, {1.0, 1.0}}, {{cplx(2.0, 0.0), cplx(1.0, 1.0)}});
  CHECK(std::abs(out[0] - 2.0 * (std::exp(1.0) - 1.0)) < 1e-14);
  CHECK(std::abs(out[1] - cplx(1.0, 1.0) * std::exp(1.0)) < 1e-14);
}

TEST_CASE("results do not depend on the thread count") {
  const Setup s = random_setup(6, 3, 808);
  const Symbol sym = Symbol::divided_difference(families::gaussian(), 3);
  setenv("MOI_LAB_THREADS", "1", 1);
  const Matrix one = moi_projection_sum(sym, s.ops).value;
  setenv("MOI_LAB_THREADS", "4", 1);
  const Matrix four = moi_projection_sum(sym, s.ops).value;
  unsetenv("MOI_LAB_THREADS");
  CHECK((one - four).norm() == 0.0);
}
