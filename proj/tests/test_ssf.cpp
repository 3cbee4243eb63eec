#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "moilab/error.hpp"
#include "moilab/harness.hpp"
#include "moilab/ssf.hpp"
#include "oracles.hpp"

using namespace moilab;

namespace {

HermitianMatrix scalar(double v) { return HermitianMatrix::diagonal({v}); }

// Trapezoid L1 distance between a grid and an exact function, on the grid.
double l1_to(const SSFGrid& g, const std::function<double(double)>& exact) {
  double acc = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double w = (i == 0 || i + 1 == g.size()) ? 0.5 : 1.0;
    acc += w * std::abs(g.values[i] - exact(g.t(i)));
  }
  return acc * g.dt;
}

}  // namespace

TEST_CASE("order-one counting function matches eigenvalue counts") {
  const HermitianMatrix a = random_hermitian(5, 1);
  const HermitianMatrix b = random_hermitian(5, 2, 1.0);
  const SSFGrid g = krein_ssf(a, b);
  CHECK(g.method == SSFGrid::Method::counting);
  CHECK(g.levels.front() == 0);
  CHECK(g.levels.back() == 0);
  int checked = 0;
  for (std::size_t i = 0; i < g.size(); i += 7) {
    const double t = g.t(i);
    bool near_break = false;
    for (double bp : g.breakpoints) near_break |= std::abs(t - bp) < 1e-9;
    if (near_break) continue;
    CHECK(g.evaluate(t) == oracle::counting_ssf(a.matrix(), b.matrix(), t));
    ++checked;
  }
  CHECK(checked > 100);
}

TEST_CASE("sign convention: a = 0, b = 1 gives +1 on (0, 1)") {
  const SSFGrid g = krein_ssf(scalar(0.0), scalar(1.0));
  CHECK(g.evaluate(0.5) == 1.0);
  CHECK(g.evaluate(-0.1) == 0.0);
  CHECK(g.evaluate(1.1) == 0.0);
  CHECK(g.l1_norm == doctest::Approx(1.0).epsilon(1e-12));
  const SSFGrid neg = krein_ssf(scalar(0.0), scalar(-1.0));
  CHECK(neg.evaluate(-0.5) == -1.0);
}

TEST_CASE("counting trace formula is exact") {
  const HermitianMatrix a = random_hermitian(6, 3);
  const HermitianMatrix b = random_hermitian(6, 4, 1.0);
  const SSFGrid g = krein_ssf(a, b);
  for (const auto& f : {families::gaussian(), families::rational(), families::exponential(), families::fourier(3.0)}) {
    const cplx lhs = (apply_function(f, eig_hermitian(a + b)) - apply_function(f, eig_hermitian(a))).trace();
    CHECK(std::abs(pair_with_derivative(g, f) - lhs) <= 1e-10 * std::max(1.0, std::abs(lhs)));
  }
}

TEST_CASE("Fourier recovery of order one matches the counting function in L1") {
  const HermitianMatrix a = random_hermitian(4, 5);
  const HermitianMatrix b = random_hermitian(4, 6, 1.0);
  const SSFGrid f = higher_ssf_fourier(a, b, 1);
  CHECK(f.method == SSFGrid::Method::fourier);
  CHECK(l1_to(f, [&](double t) { return oracle::counting_ssf(a.matrix(), b.matrix(), t); }) <= 1e-2);
  CHECK(ssf_l1_distance(f, krein_ssf(a, b)) <= 1e-2);
}

TEST_CASE("scalar closed forms for orders two and three") {
  const SSFGrid e2 = higher_ssf_fourier(scalar(0.0), scalar(1.0), 2);
  CHECK(l1_to(e2, [](double t) { return (t > 0 && t < 1) ? 1.0 - t : 0.0; }) <= 1e-2);
  CHECK(e2.l1_norm == doctest::Approx(0.5).epsilon(1e-3));
  const SSFGrid e3 = higher_ssf_fourier(scalar(0.0), scalar(1.0), 3);
  CHECK(l1_to(e3, [](double t) { return (t > 0 && t < 1) ? 0.5 * (1.0 - t) * (1.0 - t) : 0.0; }) <= 1e-2);
}

TEST_CASE("commuting pairs: recovered eta_n matches the exact sum of truncated powers") {
  const std::vector<double> av{-0.7, 0.2, 0.9};
  const std::vector<double> bv{0.5, -0.4, 0.3};
  for (int n = 2; n <= 3; ++n) {
    const SSFGrid g = higher_ssf_fourier(HermitianMatrix::diagonal(av), HermitianMatrix::diagonal(bv), n);
    CAPTURE(n);
    CHECK(l1_to(g, [&](double t) { return oracle::commuting_ssf(av, bv, n, t); }) <= 1e-2 * std::max(1.0, g.l1_norm));
  }
}

TEST_CASE("higher-order trace formula and moments on random pairs") {
  for (int n = 2; n <= 3; ++n) {
    const HermitianMatrix a = random_hermitian(6, 40 + static_cast<std::uint64_t>(n));
    const HermitianMatrix b = random_hermitian(6, 50 + static_cast<std::uint64_t>(n), 1.0);
    const SSFGrid g = higher_ssf_fourier(a, b, n);
    const TraceFormulaReport r =
        verify_trace_formula(a, b, n, g, {families::gaussian(), families::rational(), families::bump(0.0, 3.0)});
    CAPTURE(n);
    CHECK(r.max_function_error() <= 1e-3);
    CHECK(r.max_moment_error() <= 1e-3);
    REQUIRE(r.moments.size() == 3);
    // zeroth moment: Tr(B^n)/n!
    Matrix bn = Matrix::Identity(6, 6);
    for (int i = 0; i < n; ++i) bn = bn * b.matrix();
    const double expected0 = bn.trace().real() / std::tgamma(n + 1.0);
    CHECK(r.moments[0].expected == doctest::Approx(expected0).epsilon(1e-12));
  }
}

TEST_CASE("restricted-symbol trace identity") {
  const HermitianMatrix a = random_hermitian(4, 70);
  const HermitianMatrix b = random_hermitian(4, 71, 1.0);
  for (int n = 2; n <= 3; ++n) {
    const SSFGrid g = higher_ssf_fourier(a, b, n);
    for (const auto& f : {families::gaussian(), families::rational()}) {
      const DiagonalSymbolReport r = diagonal_symbol_trace(a, b, n, f, &g);
      CHECK(r.identity_error <= 1e-9);
      REQUIRE(r.pairing_error.has_value());
      CHECK(*r.pairing_error <= 1e-3);
    }
  }
  CHECK_THROWS_AS(diagonal_symbol_trace(a, b, 1, families::gaussian()), ParameterError);
}

TEST_CASE("l1 report against |B|_n^n") {
  const HermitianMatrix a = random_hermitian(4, 80);
  const HermitianMatrix b = random_hermitian(4, 81, 1.0);
  const SSFGrid g = higher_ssf_fourier(a, b, 2);
  const L1Report r = ssf_l1_report(b, 2, g);
  CHECK(r.b_norm_power == doctest::Approx(std::pow(oracle::schatten(b.matrix(), 2.0), 2)).epsilon(1e-12));
  // eta_2 is nonnegative, so its L1 norm is its integral Tr(B^2)/2.
  CHECK(r.ratio == doctest::Approx(0.5).epsilon(1e-3));
}

TEST_CASE("serialization and determinism") {
  const HermitianMatrix a = random_hermitian(3, 90);
  const HermitianMatrix b = random_hermitian(3, 91, 1.0);
  setenv("MOI_LAB_THREADS", "1", 1);
  const SSFGrid g1 = higher_ssf_fourier(a, b, 2);
  setenv("MOI_LAB_THREADS", "3", 1);
  const SSFGrid g2 = higher_ssf_fourier(a, b, 2);
  unsetenv("MOI_LAB_THREADS");
  CHECK(g1.to_csv() == g2.to_csv());
  CHECK(g1.sidecar().dump() == g2.sidecar().dump());

  const auto s = g1.sidecar();
  for (const char* key : {"n", "method", "support", "l1_norm", "params", "seed"}) CHECK(s.contains(key));
  CHECK(s["method"] == "fourier");

  const auto dir = std::filesystem::temp_directory_path() / "moilab_ssf_test";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "eta.csv").string();
  g1.save(path);
  std::ifstream csv(path);
  std::string header;
  std::getline(csv, header);
  CHECK(header == "t,value");
  CHECK(std::filesystem::exists(path + ".json"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("Fourier parameters are validated") {
  FourierParams p = FourierParams::automatic(eig_hermitian(scalar(0.0)), eig_hermitian(scalar(1.0)));
  CHECK_NOTHROW(p.validate());
  CHECK(p.s_max * p.t_step <= M_PI * (1 + 1e-12));
  FourierParams bad = p;
  bad.t_step = 3.0 * p.t_step;
  CHECK_THROWS_AS(bad.validate(), ParameterError);
  bad = p;
  bad.num_s = 7;
  CHECK_THROWS_AS(bad.validate(), ParameterError);
  CHECK_THROWS_AS(higher_ssf_fourier(scalar(0.0), scalar(1.0), 2, bad), ParameterError);
  CHECK_THROWS_AS(higher_ssf_fourier(scalar(0.0), scalar(1.0), 0), Error);
}
