#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "measureflow/analysis.hpp"
#include "measureflow/cli.hpp"
#include "measureflow/errors.hpp"
#include "measureflow/fiber.hpp"
#include "measureflow/fields.hpp"
#include "measureflow/generalized.hpp"
#include "measureflow/lattice.hpp"
#include "measureflow/measure.hpp"
#include "measureflow/transport.hpp"

#include <sstream>

namespace py = pybind11;
using namespace mflow;

namespace {

using AtomList = std::vector<std::pair<Point, double>>;

AtomList atoms_of(const DiscreteMeasure& m) {
    AtomList out;
    for (std::size_t i = 0; i < m.size(); ++i)
        out.emplace_back(Point(m.position(i).begin(), m.position(i).end()), m.weight(i));
    return out;
}

py::list plan_list(const TransportPlan& plan) {
    py::list out;
    for (const auto& e : plan.entries) out.append(py::make_tuple(e.source, e.target, e.flow));
    return out;
}

py::dict level_dict(const LevelResult& l) {
    py::dict d;
    d["N"] = l.N;
    d["overflow"] = l.overflow;
    d["note"] = l.note;
    d["steps"] = l.steps;
    d["final_mass"] = l.final_mass;
    d["final_atoms"] = l.final_atoms;
    d["reference_error"] = l.reference_error;
    d["successive_distance"] = l.successive_distance;
    d["next_N"] = l.next_N;
    return d;
}

}  // namespace

PYBIND11_MODULE(_measureflow, m) {
    m.doc() = "Measure differential equations: atomic measures, exact transport distances, lattice scheme";

    py::register_exception<MassMismatch>(m, "MassMismatch", PyExc_ValueError);
    py::register_exception<DimensionMismatch>(m, "DimensionMismatch", PyExc_ValueError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<SupportOverflow>(m, "SupportOverflow", PyExc_RuntimeError);
    py::register_exception<LipschitzViolation>(m, "LipschitzViolation", PyExc_ValueError);
    py::register_exception<SolverError>(m, "SolverError", PyExc_RuntimeError);

    py::class_<DiscreteMeasure>(m, "Measure")
        .def(py::init([](std::size_t dim, const AtomList& atoms) { return DiscreteMeasure::from_atoms(dim, atoms); }),
             py::arg("dim"), py::arg("atoms") = AtomList{})
        .def_static("dirac", &DiscreteMeasure::dirac, py::arg("x"), py::arg("weight") = 1.0)
        .def_property_readonly("dim", &DiscreteMeasure::dim)
        .def_property_readonly("atoms", &atoms_of)
        .def("mass", &DiscreteMeasure::mass)
        .def("support_radius", &DiscreteMeasure::support_radius)
        .def("cdf", &DiscreteMeasure::cdf)
        .def("__len__", &DiscreteMeasure::size)
        .def("__eq__", [](const DiscreteMeasure& a, const DiscreteMeasure& b) { return a == b; })
        .def("__add__", [](const DiscreteMeasure& a, const DiscreteMeasure& b) { return add(a, b); })
        .def("__mul__", [](const DiscreteMeasure& a, double k) { return scale(a, k); })
        .def("__rmul__", [](const DiscreteMeasure& a, double k) { return scale(a, k); })
        .def("__repr__", [](const DiscreteMeasure& a) {
            std::ostringstream s;
            s << "Measure(dim=" << a.dim() << ", atoms=" << a.size() << ", mass=" << a.mass() << ")";
            return s.str();
        });

    py::class_<LiftedMeasure>(m, "LiftedMeasure")
        .def(py::init([](std::size_t dim, const std::vector<std::tuple<Point, Point, double>>& atoms) {
                 std::vector<double> joint, w;
                 for (const auto& [x, v, weight] : atoms) {
                     if (x.size() != dim || v.size() != dim) throw DimensionMismatch("lifted atom has the wrong dimension");
                     joint.insert(joint.end(), x.begin(), x.end());
                     joint.insert(joint.end(), v.begin(), v.end());
                     w.push_back(weight);
                 }
                 return LiftedMeasure(dim, DiscreteMeasure(2 * dim, joint, w));
             }),
             py::arg("dim"), py::arg("atoms"))
        .def_property_readonly("dim", &LiftedMeasure::dim)
        .def("mass", &LiftedMeasure::mass)
        .def("__len__", &LiftedMeasure::size)
        .def("base", [](const LiftedMeasure& v) { return base_projection(v); });

    m.def("wasserstein1", [](const DiscreteMeasure& a, const DiscreteMeasure& b) {
        const auto r = wasserstein1(a, b);
        py::dict d;
        d["distance"] = r.distance;
        d["plan"] = plan_list(r.plan);
        return d;
    });
    m.def("wasserstein1_1d", &wasserstein1_1d);
    m.def("generalized_wasserstein", [](const DiscreteMeasure& a, const DiscreteMeasure& b) {
        const auto r = generalized_wasserstein(a, b);
        py::dict d;
        d["distance"] = r.distance;
        d["removed1"] = r.kept1.removed_mass;
        d["removed2"] = r.kept2.removed_mass;
        d["transport_cost"] = r.transport_cost;
        d["plan"] = plan_list(r.plan);
        return d;
    });
    auto fiber_dict = [](const FiberResult& r) {
        py::dict d;
        d["value"] = r.value;
        d["base_cost"] = r.base_cost;
        d["slack"] = r.slack;
        d["plan"] = plan_list(r.plan);
        return d;
    };
    m.def("fiber_w", [fiber_dict](const LiftedMeasure& a, const LiftedMeasure& b) { return fiber_dict(fiber_w(a, b)); });
    m.def("fiber_wg",
          [fiber_dict](const LiftedMeasure& a, const LiftedMeasure& b) { return fiber_dict(fiber_wg(a, b)); });

    py::class_<PvfSpec>(m, "Pvf")
        .def_static("constant", &PvfSpec::constant)
        .def_static("scaled_identity", &PvfSpec::scaled_identity)
        .def_static("linear", &PvfSpec::linear)
        .def_static("diffusion",
                    [](std::vector<double> s, std::vector<double> values, int q) {
                        return PvfSpec::diffusion(BreakpointTable(std::move(s), std::move(values)), q);
                    },
                    py::arg("s"), py::arg("values"), py::arg("quadrature_points") = 8)
        .def_readonly("label", &PvfSpec::label)
        .def_readonly("growth_constant", &PvfSpec::growth_constant)
        .def("__call__", [](const PvfSpec& p, const DiscreteMeasure& mu) { return evaluate_pvf(p, mu); });

    py::class_<SourceSpec>(m, "Source")
        .def_static("constant", &SourceSpec::constant)
        .def_static("proportional", [](double rate, double radius) { return SourceSpec::proportional(rate, radius); })
        .def_readonly("label", &SourceSpec::label)
        .def("__call__", [](const SourceSpec& s, const DiscreteMeasure& mu) { return evaluate_source(s, mu); });

    py::class_<LatticeGrid>(m, "Grid")
        .def_static("standard", &LatticeGrid::standard)
        .def_static("with_extent", &LatticeGrid::with_extent)
        .def_readonly("N", &LatticeGrid::N)
        .def_readonly("dim", &LatticeGrid::dim)
        .def_readonly("space_half_width", &LatticeGrid::space_half_width)
        .def("time_step", &LatticeGrid::time_step)
        .def("space_step", &LatticeGrid::space_step);

    m.def("ax_discretize", &ax_discretize);
    m.def("las_step", &las_step, py::arg("grid"), py::arg("mu"), py::arg("pvf") = std::nullopt,
          py::arg("src") = std::nullopt, py::arg("quantum") = 0.0);

    py::class_<Trajectory>(m, "Trajectory")
        .def_readonly("times", &Trajectory::times)
        .def_readonly("states", &Trajectory::states)
        .def_readonly("masses", &Trajectory::masses)
        .def_readonly("radii", &Trajectory::radii)
        .def("state_at", &Trajectory::state_at);

    m.def(
        "run_semigroup",
        [](const LatticeGrid& g, const DiscreteMeasure& mu0, std::optional<PvfSpec> pvf, std::optional<SourceSpec> src,
           double T) {
            py::gil_scoped_release release;
            return run_semigroup(g, mu0, pvf, src, T);
        },
        py::arg("grid"), py::arg("mu0"), py::arg("pvf") = std::nullopt, py::arg("src") = std::nullopt, py::arg("T"));

    m.def("preset_names", &preset_names);
    m.def(
        "convergence_study",
        [](const std::string& preset, const std::vector<int>& levels, const std::string& metric, unsigned threads) {
            ConvergenceReport r;
            {
                py::gil_scoped_release release;
                r = convergence_study(preset_problem(preset), levels, parse_metric(metric), threads);
            }
            py::dict d;
            d["problem"] = r.problem;
            d["metric"] = r.metric;
            d["levels"] = r.levels;
            d["rate_basis"] = r.rate_basis;
            d["rate"] = r.rate;
            d["exact"] = r.exact;
            d["fitted_points"] = r.fitted_points;
            py::list rows;
            for (const auto& l : r.results) rows.append(level_dict(l));
            d["results"] = rows;
            return d;
        },
        py::arg("preset"), py::arg("levels"), py::arg("metric") = "gw", py::arg("threads") = 1);
    m.def("w1_to_uniform", &w1_to_uniform);

    m.def(
        "run_cli",
        [](const std::vector<std::string>& args) {
            std::ostringstream out, err;
            int code;
            {
                py::gil_scoped_release release;
                code = cli::run(args, out, err);
            }
            return py::make_tuple(code, out.str(), err.str());
        },
        "Run the command-line tool in-process; returns (exit_code, stdout, stderr).");
}
