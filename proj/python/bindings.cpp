#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "moilab/error.hpp"
#include "moilab/harness.hpp"
#include "moilab/moi.hpp"
#include "moilab/ssf.hpp"
#include "moilab/taylor.hpp"

namespace py = pybind11;
using namespace moilab;

namespace {

// JSON crosses the boundary as text; the Python side wraps it with json.loads.
FunctionFamily family(const std::string& spec) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(spec);
  } catch (const nlohmann::json::parse_error&) {
    j = {{"id", spec}};
  }
  return family_from_json(j);
}

HermitianMatrix herm(const Matrix& m) { return HermitianMatrix(m); }

MOIOperands operands(const std::vector<Matrix>& operators, const std::vector<Matrix>& arguments) {
  MOIOperands ops;
  for (const auto& a : operators) ops.operators.push_back(eig_hermitian(herm(a)));
  ops.arguments = arguments;
  return ops;
}

py::dict grid_dict(const SSFGrid& g) {
  py::dict d;
  std::vector<double> ts(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) ts[i] = g.t(i);
  d["t"] = ts;
  d["values"] = g.values;
  d["sidecar"] = g.sidecar().dump();
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Multiple operator integrals, operator Taylor remainders and spectral shift functions";

  static py::exception<Error> base(m, "MoilabError", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<DomainError>(m, "DomainError", base.ptr());
  py::register_exception<UnsupportedOrderError>(m, "UnsupportedOrderError", base.ptr());
  py::register_exception<ContractViolation>(m, "ContractViolation", base.ptr());
  py::register_exception<ConsistencyError>(m, "ConsistencyError", base.ptr());

  m.def(
      "divided_difference",
      [](const std::string& f, const std::vector<double>& nodes) { return divided_difference(family(f), nodes); },
      py::arg("f"), py::arg("nodes"), "f^[n] on n+1 nodes; f is an id or a JSON spec");

  m.def(
      "moi",
      [](const std::string& f, const std::vector<Matrix>& operators, const std::vector<Matrix>& arguments) {
        const MOIOperands ops = operands(operators, arguments);
        return moi_projection_sum(Symbol::divided_difference(family(f), ops.order()), ops).value;
      },
      py::arg("f"), py::arg("operators"), py::arg("arguments"),
      "Projection-sum multiple operator integral with symbol f^[n], n = len(arguments)");

  m.def(
      "gateaux_derivative",
      [](const std::string& f, const Matrix& a, const Matrix& b, int k, double t) {
        return gateaux_derivative(family(f), herm(a), herm(b), k, t).value;
      },
      py::arg("f"), py::arg("a"), py::arg("b"), py::arg("k"), py::arg("t") = 0.0);

  m.def(
      "taylor_remainder",
      [](const std::string& f, const Matrix& a, const Matrix& b, int n) {
        const auto r = taylor_remainder(family(f), herm(a), herm(b), n);
        return py::make_tuple(r.value, r.relative_difference);
      },
      py::arg("f"), py::arg("a"), py::arg("b"), py::arg("n"),
      "Returns (remainder, relative difference between the two evaluation paths)");

  m.def(
      "ssf",
      [](const Matrix& a, const Matrix& b, int n) {
        return grid_dict(n == 1 ? krein_ssf(herm(a), herm(b)) : higher_ssf_fourier(herm(a), herm(b), n));
      },
      py::arg("a"), py::arg("b"), py::arg("n"), "Spectral shift function of order n on a grid");

  m.def(
      "counterexample_csv",
      [](double p, const std::vector<int>& dims, double t0) { return lp_counterexample_demo(p, dims, t0).to_csv(); },
      py::arg("p") = 2.0, py::arg("dims") = std::vector<int>{16, 64, 256, 1024, 4096}, py::arg("t0") = 1.0);

  m.def(
      "generate_ensemble",
      [](const std::string& config_json) {
        const auto pair = generate_ensemble(ExperimentConfig::from_json(nlohmann::json::parse(config_json)));
        return py::make_tuple(pair.a.matrix(), pair.b.matrix());
      },
      py::arg("config_json"));

  m.def(
      "run_suite",
      [](const std::string& config_json, const std::string& suite, const std::string& out_dir) {
        nlohmann::json j;
        try {
          j = nlohmann::json::parse(config_json);
        } catch (const nlohmann::json::parse_error& e) {
          throw ConfigError(e.what());
        }
        py::gil_scoped_release release;
        return run_suite(ExperimentConfig::from_json(j), suite, out_dir).to_json().dump();
      },
      py::arg("config_json"), py::arg("suite") = "all", py::arg("out_dir") = "");
}
