#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "moilab/error.hpp"
#include "moilab/harness.hpp"
#include "moilab/matrix_io.hpp"
#include "moilab/rng.hpp"
#include "oracles.hpp"

using namespace moilab;
using nlohmann::json;

namespace {

std::string strip_wall_time(const Report& r) {
  auto j = r.to_json();
  j.erase("wall_time_s");
  return j.dump();
}

}  // namespace

TEST_CASE("SplitMix64 reference stream") {
  SplitMix64 rng(0);
  CHECK(rng.next() == 0xE220A8397B1DCDAFULL);
  CHECK(rng.next() == 0x6E789E6AA1B965F4ULL);
  SplitMix64 u(1234567);
  for (int i = 0; i < 1000; ++i) {
    const double x = u.uniform();
    CHECK(x >= 0.0);
    CHECK(x < 1.0);
  }
  CHECK(derive_seed(5, "a") != derive_seed(5, "b"));
  CHECK(derive_seed(5, "a") == derive_seed(5, "a"));
}

TEST_CASE("config parsing and validation") {
  const auto c = ExperimentConfig::from_json({{"seed", 7}, {"dimension", 3}, {"order", 2}});
  CHECK(c.seed == 7);
  CHECK(c.dimension == 3);
  CHECK(c.functions.size() == 3);
  CHECK_FALSE(c.checks.has_value());
  CHECK_THROWS_AS(ExperimentConfig::from_json({{"dimension", 3}}), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json({{"seed", -1}}), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json({{"seed", 1}, {"dimension", 0}}), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json({{"seed", 1}, {"order", 0}}), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json({{"seed", 1}, {"tolerances", {{"derivative", -1.0}}}}), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json({{"seed", 1}, {"tolerances", {{"bogus", 1.0}}}}), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json({{"seed", 1}, {"ensemble", "wishart"}}), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json({{"seed", 1}, {"ensemble", "fixed_matrix_file"}}), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json({{"seed", 1}, {"functions", {{{"id", "nope"}}}}}), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json({{"seed", 1}, {"typo", 1}}), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::load("/nonexistent/config.json"), ConfigError);
  const auto t = ExperimentConfig::from_json({{"seed", 1}, {"tolerances", {{"ssf_l1", 0.5}}}});
  CHECK(t.tolerances.ssf_l1 == 0.5);
  CHECK(t.tolerances.derivative == 1e-5);
}

TEST_CASE("gue_like ensemble is deterministic and normalized") {
  const auto c = ExperimentConfig::from_json({{"seed", 1}, {"dimension", 2}});
  const MatrixPair p1 = generate_ensemble(c);
  const MatrixPair p2 = generate_ensemble(c);
  CHECK(matrix_to_csv(p1.a.matrix()) == matrix_to_csv(p2.a.matrix()));
  CHECK(matrix_to_csv(p1.b.matrix()) == matrix_to_csv(p2.b.matrix()));
  CHECK(oracle::schatten(p1.b.matrix(), std::numeric_limits<double>::infinity()) == doctest::Approx(1.0).epsilon(1e-12));
  const MatrixPair other = generate_ensemble(c, 2);
  CHECK((other.a.matrix() - p1.a.matrix()).norm() > 0.0);
  const auto scalar = ExperimentConfig::from_json({{"seed", 1}, {"dimension", 1}});
  const MatrixPair s = generate_ensemble(scalar);
  CHECK(s.a.dim() == 1);
  CHECK(std::abs(s.b.matrix()(0, 0)) == doctest::Approx(1.0));
}

TEST_CASE("diagonal_heavy_tail and fixed_matrix_file ensembles") {
  const auto c = ExperimentConfig::from_json({{"seed", 1}, {"dimension", 8}, {"ensemble", "diagonal_heavy_tail"}});
  const MatrixPair p = generate_ensemble(c);
  CHECK((p.a.matrix() - Matrix::Identity(8, 8)).norm() == 0.0);
  CHECK(p.b.matrix()(0, 0).real() == doctest::Approx(std::pow(1.0 / 8.0, -1.0 / 3.0)));
  CHECK(p.b.matrix()(7, 7).real() == doctest::Approx(1.0));

  const auto dir = std::filesystem::temp_directory_path() / "moilab_harness_test";
  std::filesystem::create_directories(dir);
  save_matrix(p.b.matrix(), (dir / "b.csv").string());
  {
    std::ofstream a(dir / "a.json");
    a << "[[1, 0], [0, 2]]";
  }
  std::ofstream(dir / "b2.json") << "[[0.5, [0, 1]], [[0, -1], 0.5]]";
  const auto f = ExperimentConfig::from_json(
      {{"seed", 1}, {"ensemble", "fixed_matrix_file"}, {"matrix_a", "a.json"}, {"matrix_b", "b2.json"}}, dir.string());
  const MatrixPair q = generate_ensemble(f);
  CHECK(q.a.dim() == 2);
  CHECK(q.b.matrix()(0, 1) == cplx(0, 1));
  const auto mismatch = ExperimentConfig::from_json(
      {{"seed", 1}, {"ensemble", "fixed_matrix_file"}, {"matrix_a", "a.json"}, {"matrix_b", "b.csv"}}, dir.string());
  CHECK_THROWS_AS(generate_ensemble(mismatch), ConfigError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("suites list their checks") {
  CHECK(suite_checks("derivatives").size() == 3);
  CHECK(suite_checks("all").size() == 21);
  CHECK_THROWS_AS(suite_checks("nope"), ConfigError);
}

TEST_CASE("empty check list gives an empty passing report") {
  const auto c = ExperimentConfig::from_json({{"seed", 3}, {"checks", json::array()}});
  const Report r = run_suite(c, "all");
  CHECK(r.records.empty());
  CHECK(r.pass());
}

TEST_CASE("records follow the configured order; unknown checks are config errors") {
  const auto c = ExperimentConfig::from_json(
      {{"seed", 3}, {"dimension", 3}, {"checks", {"telescoping", "perturbation_first_order"}}});
  const Report r = run_suite(c, "perturbation");
  REQUIRE(r.records.size() == 2);
  CHECK(r.records[0].name == "telescoping");
  CHECK(r.records[1].name == "perturbation_first_order");
  CHECK(r.pass());
  const Report none = run_suite(c, "ssf");
  CHECK(none.records.empty());
  const auto bad = ExperimentConfig::from_json({{"seed", 3}, {"checks", {"nope"}}});
  CHECK_THROWS_AS(run_suite(bad, "all"), ConfigError);
}

TEST_CASE("a failing check is recorded with its error and does not stop the others") {
  const auto c = ExperimentConfig::from_json(
      {{"seed", 3}, {"dimension", 2}, {"order", 1}, {"checks", {"ssf_diagonal_symbol_identity", "telescoping"}}});
  const Report r = run_suite(c, "all");
  REQUIRE(r.records.size() == 2);
  CHECK_FALSE(r.records[0].pass);
  CHECK(r.records[0].error.has_value());
  CHECK(r.records[1].pass);
  CHECK_FALSE(r.pass());
  const auto j = r.to_json();
  CHECK(j["records"][0]["measured"].is_null());
  CHECK(j["records"][0].contains("error"));
}

TEST_CASE("tight tolerances turn a pass into a fail") {
  const auto c = ExperimentConfig::from_json(
      {{"seed", 3}, {"dimension", 3}, {"tolerances", {{"remainder", 1e-30}}}, {"checks", {"remainder_two_path"}}});
  const Report r = run_suite(c, "derivatives");
  REQUIRE(r.records.size() == 1);
  CHECK_FALSE(r.records[0].pass);
  CHECK_FALSE(r.records[0].error.has_value());
}

TEST_CASE("reports are reproducible and written with artifacts") {
  const auto c = ExperimentConfig::from_json({{"seed", 11}, {"dimension", 3}, {"order", 2}});
  const auto dir = std::filesystem::temp_directory_path() / "moilab_report_test";
  std::filesystem::remove_all(dir);
  const Report r1 = run_suite(c, "ssf", dir.string());
  const Report r2 = run_suite(c, "ssf");
  CHECK(strip_wall_time(r1) == strip_wall_time(Report{r2.config, r2.suite, r2.records, r1.artifacts, 0.0}));
  CHECK(r1.pass());
  CHECK(std::filesystem::exists(dir / "report.json"));
  CHECK(std::filesystem::exists(dir / "eta_2.csv"));
  CHECK(std::filesystem::exists(dir / "eta_2.csv.json"));
  std::ifstream in(dir / "report.json");
  const json j = json::parse(in);
  CHECK(j["config"]["seed"] == 11);
  CHECK(j.contains("wall_time_s"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("counterexample suite writes its table") {
  const auto c = ExperimentConfig::from_json({{"seed", 1}, {"counterexample", {{"dims", {16, 64, 256}}}}});
  const auto dir = std::filesystem::temp_directory_path() / "moilab_ce_test";
  const Report r = run_suite(c, "counterexample", dir.string());
  CHECK(r.pass());
  CHECK(std::filesystem::exists(dir / "counterexample.csv"));
  std::filesystem::remove_all(dir);
  CHECK_THROWS_AS(ExperimentConfig::from_json({{"seed", 1}, {"counterexample", {{"dims", {64, 16}}}}}), ConfigError);
}
