#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "metarenewal/cli.hpp"
#include "metarenewal/config.hpp"
#include "metarenewal/periodic.hpp"
#include "metarenewal/renewal.hpp"
#include "metarenewal/scenarios.hpp"
#include "metarenewal/spectral.hpp"
#include "metarenewal/steady.hpp"

namespace py = pybind11;
using namespace metarenewal;

namespace {

py::dict validation_dict(const validation_report& rep) {
  py::list conditions;
  for (const auto& c : rep.conditions) {
    py::dict d;
    d["name"] = c.name;
    d["passed"] = c.passed;
    d["detail"] = c.detail;
    conditions.append(d);
  }
  py::dict out;
  out["passed"] = rep.passed();
  out["conditions"] = conditions;
  out["column_sums_nonpositive"] = rep.column_sums_nonpositive;
  return out;
}

// rows are time nodes, columns patches
Eigen::MatrixXd path_matrix(const newborn_path& p) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(p.size()), static_cast<Eigen::Index>(p.patches()));
  for (std::size_t j = 0; j < p.size(); ++j)
    for (std::size_t k = 0; k < p.patches(); ++k)
      m(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) = p.value(j, k);
  return m;
}

Eigen::VectorXd path_times(const newborn_path& p) {
  Eigen::VectorXd t(static_cast<Eigen::Index>(p.size()));
  for (std::size_t j = 0; j < p.size(); ++j) t[static_cast<Eigen::Index>(j)] = p.time(j);
  return t;
}

Eigen::MatrixXd profile_matrix(const periodic_profile& p) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(p.nodes()), static_cast<Eigen::Index>(p.patches()));
  for (std::size_t j = 0; j < p.nodes(); ++j) m.row(static_cast<Eigen::Index>(j)) = p.sample(j).transpose();
  return m;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Age-structured metapopulation renewal models";

  auto base = py::register_exception<error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<structural_error>(m, "StructuralError", base.ptr());
  py::register_exception<invalid_model>(m, "InvalidModel", base.ptr());
  py::register_exception<precondition_error>(m, "PreconditionError", base.ptr());
  py::register_exception<step_size_error>(m, "StepSizeError", base.ptr());
  py::register_exception<non_convergence>(m, "NonConvergence", base.ptr());
  py::register_exception<reducible_matrix>(m, "ReducibleMatrix", base.ptr());
  py::register_exception<degenerate_eigenvalue>(m, "DegenerateEigenvalue", base.ptr());
  py::register_exception<design_error>(m, "DesignError", base.ptr());
  py::register_exception<consistency_error>(m, "ConsistencyError", base.ptr());
  py::register_exception<config_error>(m, "ConfigError", base.ptr());

  py::class_<rate_function>(m, "RateFunction")
      .def_static("constant", &rate_function::constant, py::arg("value"))
      .def_static("window", &rate_function::window, py::arg("lo"), py::arg("hi"), py::arg("value"))
      .def_static("piecewise_linear", &rate_function::piecewise_linear, py::arg("knots"))
      .def_static(
          "separable",
          [](const rate_function& age, double period, std::vector<std::pair<double, double>> samples) {
            return rate_function::separable(age, periodic_modulation(period, std::move(samples)));
          },
          py::arg("age"), py::arg("period"), py::arg("samples"))
      .def("__call__", [](const rate_function& f, double a, double t) { return f(a, t); }, py::arg("a"),
           py::arg("t") = 0.0)
      .def_property_readonly("time_dependent", &rate_function::time_dependent)
      .def("__repr__", &rate_function::describe);

  py::class_<mortality_law>(m, "MortalityLaw")
      .def_static("logistic", &mortality_law::logistic, py::arg("mu"), py::arg("capacity"))
      .def_static("power_law", &mortality_law::power_law, py::arg("mu"), py::arg("p"), py::arg("gamma"))
      .def_static("linear", &mortality_law::linear, py::arg("mu"))
      .def("__call__", [](const mortality_law& law, double v, double a, double t) { return law(v, a, t); },
           py::arg("v"), py::arg("a"), py::arg("t") = 0.0);

  py::class_<model_spec>(m, "Model")
      .def(py::init([](double lifespan, std::pair<double, double> window, std::vector<rate_function> birth,
                       std::vector<mortality_law> mortality, std::optional<Eigen::MatrixXd> dispersal,
                       std::optional<std::vector<rate_function>> initial) {
             const std::size_t n = birth.size();
             auto d = dispersal ? dispersal_matrix::constant(*dispersal) : dispersal_matrix(n);
             auto f = initial ? *initial : std::vector<rate_function>(n, rate_function::constant(0.0));
             return model_spec(n, lifespan, window.first, window.second, std::move(birth), std::move(mortality),
                               std::move(d), std::move(f));
           }),
           py::arg("lifespan"), py::arg("fertility_window"), py::arg("birth"), py::arg("mortality"),
           py::arg("dispersal") = py::none(), py::arg("initial") = py::none())
      .def_static("from_json", [](const std::string& text) { return parse_config(text).model; }, py::arg("text"))
      .def_static("load", [](const std::string& path) { return load_config(path).model; }, py::arg("path"))
      .def_property_readonly("patches", &model_spec::patches)
      .def_property_readonly("lifespan", &model_spec::lifespan)
      .def_property_readonly("fertility_window",
                             [](const model_spec& s) { return std::make_pair(s.fertility_lo(), s.fertility_hi()); })
      .def_property_readonly("time_dependent", &model_spec::time_dependent)
      .def_property_readonly("default_step", &model_spec::default_step)
      .def("with_dispersal",
           [](const model_spec& s, const Eigen::MatrixXd& d) { return s.with_dispersal(dispersal_matrix::constant(d)); },
           py::arg("dispersal"));

  m.def("validate", [](const model_spec& s) { return validation_dict(validate(s)); }, py::arg("model"));

  m.def(
      "assemble_R0",
      [](const model_spec& s, double da) {
        auto r = assemble_R0(s, da);
        py::dict out;
        out["matrix"] = r.entries;
        out["sigma"] = r.sigma;
        out["perron_vector"] = r.perron_vector;
        out["irreducible"] = r.irreducible;
        return out;
      },
      py::arg("model"), py::arg("da") = 0.0);

  m.def(
      "sigma_bounds",
      [](const model_spec& s, double da) {
        auto b = sigma_bounds(s, da);
        return py::make_tuple(b.lower, b.upper);
      },
      py::arg("model"), py::arg("da") = 0.0);

  m.def("theta_upper_bound", &theta_upper_bound, py::arg("model"), py::arg("da") = 0.0);
  m.def(
      "theta_lower_bound", [](const model_spec& s, std::size_t k, double da) { return theta_lower_bound(s, k, std::nullopt, da); },
      py::arg("model"), py::arg("patch"), py::arg("da") = 0.0);

  m.def(
      "maximal_solution",
      [](const model_spec& s, double da, double tol) {
        steady_options o;
        o.da = da;
        o.tol = tol;
        return maximal_solution(s, o).theta;
      },
      py::arg("model"), py::arg("da") = 0.0, py::arg("tol") = 1e-8);

  m.def(
      "classify",
      [](const model_spec& s, double da, double tol) {
        steady_options o;
        o.da = da;
        o.tol = tol;
        auto st = classify(s, o);
        py::dict out;
        out["classification"] = to_string(st.classification);
        out["theta"] = st.theta;
        out["sigma"] = st.sigma;
        out["asymptotic_total"] = st.asymptotic_total;
        out["converged"] = st.converged;
        return out;
      },
      py::arg("model"), py::arg("da") = 0.0, py::arg("tol") = 1e-8);

  m.def(
      "solve_renewal",
      [](const model_spec& s, double t_end, double da, double tol) {
        renewal_options o;
        o.da = da;
        o.tol = tol;
        auto sol = solve_renewal(s, t_end, o);
        py::dict out;
        out["t"] = path_times(sol.rho);
        out["rho"] = path_matrix(sol.rho);
        out["iterations"] = sol.iterations;
        out["residual"] = sol.residual;
        out["iteration_bound"] = sol.certificate ? py::cast(*sol.certificate) : py::none();
        return out;
      },
      py::arg("model"), py::arg("t_end"), py::arg("da") = 0.0, py::arg("tol") = 1e-8);

  m.def(
      "periodic_R0",
      [](const model_spec& s, std::size_t nodes, double da) {
        auto r = assemble_periodic_R0(s, nodes, da);
        py::dict out;
        out["sigma"] = r.sigma;
        out["period"] = r.period;
        out["matrix"] = r.matrix;
        return out;
      },
      py::arg("model"), py::arg("nodes") = 64, py::arg("da") = 0.0);

  m.def(
      "periodic_maximal_solution",
      [](const model_spec& s, std::size_t nodes, double da, double tol) {
        periodic_options o;
        o.da = da;
        o.tol = tol;
        auto sol = periodic_maximal_solution(s, nodes, o);
        Eigen::VectorXd phases(static_cast<Eigen::Index>(sol.theta.nodes()));
        for (std::size_t j = 0; j < sol.theta.nodes(); ++j) phases[static_cast<Eigen::Index>(j)] = sol.theta.phase(j);
        py::dict out;
        out["phase"] = phases;
        out["theta"] = profile_matrix(sol.theta);
        out["iterations"] = sol.iterations;
        out["residual"] = sol.residual;
        return out;
      },
      py::arg("model"), py::arg("nodes") = 64, py::arg("da") = 0.0, py::arg("tol") = 1e-8);

  m.def(
      "perturbed_sigma",
      [](const model_spec& s, const Eigen::MatrixXd& direction, std::vector<double> eps, double da) {
        auto r = perturbed_sigma(s, dispersal_matrix::constant(direction), eps, da);
        py::list points;
        for (const auto& p : r.points) {
          py::dict d;
          d["eps"] = p.eps;
          d["sigma"] = p.sigma_exact;
          d["predicted"] = p.sigma_predicted;
          d["remainder"] = p.remainder;
          points.append(d);
        }
        py::dict out;
        out["sigma_isolated"] = r.sigma_isolated;
        out["source"] = r.source;
        out["correction"] = r.correction;
        out["points"] = points;
        out["remainder_slope"] = r.remainder_slope;
        return out;
      },
      py::arg("model"), py::arg("direction"), py::arg("eps"), py::arg("da") = 0.0);

  m.def(
      "design_two_sink",
      [](double mu1, double mu2, double rho2) {
        auto d = design_two_sink(mu1, mu2, rho2);
        py::dict out;
        out["c_star"] = d.c_star;
        out["supports"] = py::make_tuple(py::make_tuple(d.c1, d.d1), py::make_tuple(d.c2, d.d2));
        out["heights"] = py::make_tuple(d.height1, d.height2);
        out["lifespan"] = d.lifespan;
        out["P"] = Eigen::MatrixXd(d.P);
        out["sigma_isolated"] = Eigen::VectorXd(d.sigma_isolated);
        out["eps_max"] = d.eps_max;
        out["eps_capped"] = d.eps_capped;
        out["certified"] = d.certified;
        out["model"] = two_sink_model(d, 0.0);
        return out;
      },
      py::arg("mu1"), py::arg("mu2"), py::arg("rho2"));

  m.def(
      "run_cli",
      [](std::vector<std::string> args) {
        std::ostringstream out, err;
        int code = run_cli(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"));
}
