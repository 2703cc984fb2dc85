#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <fstream>
#include <sstream>

#include "qttfem/bench.hpp"
#include "qttfem/errors.hpp"

namespace py = pybind11;
using namespace qttfem;

namespace
{
  ProblemConfig config_from_text(const std::string& text)
  {
    std::istringstream is(text);
    return parse_config(is);
  }

  std::string config_to_text(const ProblemConfig& cfg)
  {
    std::ostringstream os;
    write_config(os, cfg);
    return os.str();
  }

  py::dict report_dict(const SolveReport& r)
  {
    py::dict d;
    d["case"] = r.case_name;
    d["d"] = r.d;
    d["eps"] = r.eps;
    d["dofs"] = r.dofs;
    d["energy_error"] = r.energy_error;
    d["l2_error"] = r.l2_error;
    d["Rd"] = r.Rd;
    d["Nd"] = r.Nd;
    d["erank_K"] = r.erank_K;
    d["erank_f"] = r.erank_f;
    d["erank_u"] = r.erank_u;
    d["storage_K"] = r.storage_K;
    d["storage_f"] = r.storage_f;
    d["wall_ms"] = r.wall_ms;
    d["converged"] = r.converged;
    d["drift"] = r.drift;
    return d;
  }
}

PYBIND11_MODULE(_qttfem, m)
{
  m.doc() = "QTT finite element solver for 2D linear elasticity";

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<SizeError>(m, "SizeError", base.ptr());
  py::register_exception<ArgumentError>(m, "ArgumentError", base.ptr());
  py::register_exception<TopologyError>(m, "TopologyError", base.ptr());
  py::register_exception<DegenerateElementError>(m, "DegenerateElementError", base.ptr());
  py::register_exception<SingularSystemError>(m, "SingularSystemError", base.ptr());

  py::class_<TTVector>(m, "TTVector")
    .def_property_readonly("order", &TTVector::order)
    .def_property_readonly("ranks", &TTVector::ranks)
    .def_property_readonly("modes", &TTVector::modes)
    .def_property_readonly("max_rank", &TTVector::max_rank)
    .def_property_readonly("param_count", [](const TTVector& t) { return rank_profile(t).param_count; })
    .def("full", [](const TTVector& t) { return Eigen::VectorXd(tt_contract(t)); })
    .def("__len__", [](const TTVector& t) { return t.size(); });

  m.def("tt_decompose", py::overload_cast<const Eigen::VectorXd&, double>(&tt_decompose), py::arg("dense"), py::arg("eps") = 0.0,
        "QTT decomposition of a vector of length 2^d");
  m.def("tt_round", py::overload_cast<const TTVector&, double, int>(&tt_round), py::arg("t"), py::arg("eps"), py::arg("max_rank") = -1);
  m.def("tt_add", py::overload_cast<const TTVector&, const TTVector&>(&tt_add));
  m.def("tt_scale", py::overload_cast<const TTVector&, double>(&tt_scale));
  m.def("tt_dot", &tt_dot);
  m.def("tt_norm", py::overload_cast<const TTVector&>(&tt_norm));

  py::class_<ProblemConfig>(m, "ProblemConfig")
    .def_readwrite("name", &ProblemConfig::name)
    .def_readwrite("epsilon", &ProblemConfig::epsilon)
    .def_readwrite("d_ref", &ProblemConfig::d_ref)
    .def_readwrite("expected_alpha", &ProblemConfig::expected_alpha)
    .def_property(
      "seed", [](const ProblemConfig& c) { return c.solver.seed; }, [](ProblemConfig& c, std::uint64_t s) { c.solver.seed = s; })
    .def_property_readonly("q", [](const ProblemConfig& c) { return c.subdomains.size(); })
    .def("to_text", &config_to_text)
    .def("__eq__", [](const ProblemConfig& a, const ProblemConfig& b) { return a == b; });

  m.def("builtin_config", &builtin_config, py::arg("name"), "cantilever, sen or lshape");
  m.def("load_config", &load_config, py::arg("path"));
  m.def("parse_config", &config_from_text, py::arg("text"));

  py::class_<SolveReport>(m, "SolveReport")
    .def_readonly("case", &SolveReport::case_name)
    .def_readonly("d", &SolveReport::d)
    .def_readonly("eps", &SolveReport::eps)
    .def_readonly("dofs", &SolveReport::dofs)
    .def_readonly("energy_error", &SolveReport::energy_error)
    .def_readonly("l2_error", &SolveReport::l2_error)
    .def_readonly("Rd", &SolveReport::Rd)
    .def_readonly("Nd", &SolveReport::Nd)
    .def_readonly("erank_K", &SolveReport::erank_K)
    .def_readonly("erank_f", &SolveReport::erank_f)
    .def_readonly("erank_u", &SolveReport::erank_u)
    .def_readonly("storage_K", &SolveReport::storage_K)
    .def_readonly("storage_f", &SolveReport::storage_f)
    .def_readonly("wall_ms", &SolveReport::wall_ms)
    .def_readonly("converged", &SolveReport::converged)
    .def_readonly("drift", &SolveReport::drift)
    .def("as_dict", &report_dict)
    .def("__eq__", [](const SolveReport& a, const SolveReport& b) { return a == b; })
    .def("__repr__", [](const SolveReport& r) {
      return "<SolveReport " + r.case_name + " d=" + std::to_string(r.d) + " E=" + std::to_string(r.energy_error) + ">";
    });

  py::class_<ReferenceCache>(m, "ReferenceCache")
    .def(py::init<>())
    .def("__len__", &ReferenceCache::size);

  m.def(
    "run_case",
    [](const ProblemConfig& cfg, int d, double eps, int d_ref, ReferenceCache* cache) {
      py::gil_scoped_release nogil;
      ReferenceCache local;
      return run_case(cfg, d, eps, cache ? *cache : local, d_ref);
    },
    py::arg("config"), py::arg("d"), py::arg("eps") = 1e-3, py::arg("d_ref") = 0, py::arg("cache") = nullptr);

  m.def(
    "sweep",
    [](const ProblemConfig& cfg, int d_lo, int d_hi, const std::vector<double>& eps, int d_ref) {
      py::gil_scoped_release nogil;
      ReferenceCache refs;
      return sweep(cfg, d_lo, d_hi, eps, refs, d_ref);
    },
    py::arg("config"), py::arg("d_lo"), py::arg("d_hi"), py::arg("eps") = std::vector<double>{1e-3}, py::arg("d_ref") = 0);

  m.def(
    "verify",
    [](const ProblemConfig& cfg, int d) {
      const auto r = verify_case(cfg, d);
      return py::make_tuple(r.pass, r.lines);
    },
    py::arg("config"), py::arg("d"), "returns (passed, report lines)");

  m.def("csv_header", &csv_header);
  m.def("to_csv", [](const std::vector<SolveReport>& rows) {
    std::ostringstream os;
    write_csv(os, rows);
    return os.str();
  });
  m.def("from_csv", [](const std::string& text) {
    std::istringstream is(text);
    return parse_csv(is);
  });
  m.def("dof_count", &dof_count, py::arg("q"), py::arg("d"));
}
