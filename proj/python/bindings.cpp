// Python bindings for the core operations. Vectors cross as lists; the CLI
// entry point returns the JSON document as a string.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "ghzbayes/adaptive.hpp"
#include "ghzbayes/cli/commands.hpp"
#include "ghzbayes/clock.hpp"
#include "ghzbayes/noise.hpp"
#include "ghzbayes/oqi.hpp"
#include "ghzbayes/partitions.hpp"
#include "ghzbayes/prior.hpp"
#include "ghzbayes/schemes.hpp"
#include "ghzbayes/unwind.hpp"

namespace py = pybind11;
using namespace ghzbayes;

namespace {

std::vector<double> to_vector(std::span<const double> s) { return {s.begin(), s.end()}; }

py::dict oqi_dict(const OqiSolution& s) {
  py::dict d;
  d["bmse"] = s.bmse;
  d["iterations"] = s.iterations;
  d["converged"] = s.converged;
  d["history"] = s.history;
  return d;
}

std::string run_command(const std::string& command,
                        const std::map<std::string, std::string>& params) {
  cli::ExperimentSpec spec(command);
  for (const auto& [k, v] : params) spec.set(k, v);
  cli::RunOptions options;
  options.write_files = false;
  return cli::run(spec, options).result.dump();
}

}  // namespace

PYBIND11_MODULE(_ghzbayes, m) {
  m.doc() = "Bayesian phase estimation with blocks of GHZ states";

  py::register_exception<cli::ValidationError>(m, "ValidationError", PyExc_ValueError);

  py::class_<PriorGrid>(m, "PriorGrid")
      .def_property_readonly("width", &PriorGrid::width)
      .def_property_readonly("lo", &PriorGrid::lo)
      .def_property_readonly("hi", &PriorGrid::hi)
      .def("__len__", &PriorGrid::size)
      .def_property_readonly("nodes", [](const PriorGrid& g) { return to_vector(g.nodes()); })
      .def_property_readonly("mass", [](const PriorGrid& g) { return to_vector(g.mass()); })
      .def("second_moment", &PriorGrid::second_moment)
      .def("scaled", &PriorGrid::scaled, py::arg("factor"));

  m.def("gaussian_prior", &gaussian_prior, py::arg("delta_phi"), py::arg("node_count"));
  m.def("default_gaussian_prior", &default_gaussian_prior, py::arg("delta_phi"),
        py::arg("max_frequency"));
  m.def("uniform_prior", &uniform_prior, py::arg("lo"), py::arg("hi"), py::arg("node_count"));
  m.def("css_prior", &css_prior, py::arg("delta_phi"), py::arg("n_total"));

  py::class_<Partition>(m, "Partition")
      .def(py::init(&Partition::parse), py::arg("text"))
      .def_property_readonly("n_total", &Partition::n_total)
      .def_property_readonly("block_count", &Partition::block_count)
      .def_property_readonly("blocks",
                             [](const Partition& p) {
                               std::vector<std::pair<int, int>> out;
                               for (const Block& b : p.blocks()) {
                                 out.emplace_back(1 << b.exponent, b.copies);
                               }
                               return out;
                             })
      .def("measurement_order", &Partition::measurement_order)
      .def("__str__", &Partition::to_string)
      .def("__repr__", [](const Partition& p) { return "Partition('" + p.to_string() + "')"; })
      .def("__eq__", &Partition::operator==);

  m.def(
      "enumerate_partitions",
      [](int n, int k_cap, int max_blocks, std::size_t budget) {
        const PartitionList l = enumerate_partitions(n, EnumerationLimits{k_cap, max_blocks, budget});
        return py::make_tuple(l.partitions, l.truncated);
      },
      py::arg("n_total"), py::arg("k_cap") = -1, py::arg("max_blocks") = -1,
      py::arg("budget") = 0, "Returns (partitions, truncated).");
  m.def("count_binary_partitions", &count_binary_partitions, py::arg("n"), py::arg("k_cap") = -1);
  m.def(
      "frequency_amplitudes",
      [](const Partition& p) { return frequency_amplitudes(p).amplitude; }, py::arg("partition"));

  m.def(
      "optimal_measurement_bmse",
      [](const Partition& p, const PriorGrid& prior) { return optimal_measurement_bmse(p, prior); },
      py::arg("partition"), py::arg("prior"));
  m.def(
      "solve_oqi",
      [](int n, const PriorGrid& prior, double tol, int max_iter) {
        OqiOptions o;
        o.tol = tol;
        o.max_iter = max_iter;
        return oqi_dict(solve_oqi(n, prior, o));
      },
      py::arg("n_total"), py::arg("prior"), py::arg("tol") = 1e-10, py::arg("max_iter") = 2000);

  py::class_<MeasurementPlan>(m, "MeasurementPlan")
      .def_static("for_partition", &MeasurementPlan::for_partition, py::arg("partition"))
      .def_static("for_order", &MeasurementPlan::for_order, py::arg("order"))
      .def_readwrite("order", &MeasurementPlan::order)
      .def_readwrite("rotations", &MeasurementPlan::rotations)
      .def_property_readonly("steps", &MeasurementPlan::steps);

  m.def("plan_prior", &plan_prior, py::arg("delta_phi"), py::arg("order"));
  m.def(
      "plan_bmse",
      [](const MeasurementPlan& plan, const PriorGrid& prior) { return bmse(plan, prior); },
      py::arg("plan"), py::arg("prior"));
  m.def(
      "plan_gradient",
      [](const MeasurementPlan& plan, const PriorGrid& prior) {
        return bmse_gradient(plan, prior);
      },
      py::arg("plan"), py::arg("prior"));
  m.def(
      "optimize_plan",
      [](const MeasurementPlan& plan, const PriorGrid& prior, int restarts, std::uint64_t seed,
         double step, int max_steps) {
        OptimizerConfig oc;
        oc.restarts = restarts;
        oc.seed = seed;
        oc.step = step;
        oc.max_steps = max_steps;
        const OptimizeResult r = optimize_plan(plan, prior, oc);
        return py::make_tuple(r.plan, r.bmse);
      },
      py::arg("plan"), py::arg("prior"), py::arg("restarts") = 8, py::arg("seed") = 1,
      py::arg("step") = 0.02, py::arg("max_steps") = 2000, "Returns (plan, bmse).");

  m.def("css_bmse", &css_bmse, py::arg("n_total"), py::arg("prior"));
  m.def("ghz_parity_closed_form", &ghz_parity_closed_form, py::arg("n_total"),
        py::arg("delta_phi"));
  m.def("plateau_hl", &plateau_hl, py::arg("delta_phi"));
  m.def("plateau_sql", &plateau_sql, py::arg("delta_phi"));
  m.def("to_db", &to_db, py::arg("variance_ratio"));

  m.def(
      "noisy_plan_bmse",
      [](const MeasurementPlan& plan, const PriorGrid& prior, double p_a, double p_e, double f0) {
        const NoiseModel nm{p_a, p_e, f0};
        nm.validate();
        return noisy_plan_bmse(plan, prior, nm);
      },
      py::arg("plan"), py::arg("prior"), py::arg("p_a") = 0.0, py::arg("p_e") = 0.0,
      py::arg("f0") = 1.0);

  m.def(
      "rescale",
      [](const std::string& text, int l_max, bool reuse) {
        const RescaledFrame f = rescale(ExtendedPartition::parse(text, reuse), l_max);
        py::dict d;
        d["partition"] = f.partition.to_string();
        d["n_prime"] = f.n_prime;
        d["scale_factor"] = f.scale_factor;
        d["prior_scale"] = f.prior_scale;
        return d;
      },
      py::arg("partition"), py::arg("l_max"), py::arg("reuse") = false);
  m.def(
      "estimate_P", [](const std::vector<double>& betas) { return estimate_P(betas); },
      py::arg("betas"));

  m.def("slip_variance", &slip_variance, py::arg("delta_phi"));
  m.def(
      "allan_deviation",
      [](const std::string& protocol, double tau, int n_atoms, double gamma_ratio) {
        ClockConfig cfg;
        cfg.protocol = parse_clock_protocol(protocol);
        cfg.n_atoms = n_atoms;
        cfg.gamma_ind = 1.0 / gamma_ratio;
        const AllanPoint a = allan_deviation(cfg, tau);
        return py::make_tuple(a.sigma_y, a.t_opt);
      },
      py::arg("protocol"), py::arg("tau"), py::arg("n_atoms") = 200, py::arg("gamma_ratio") = 1e4,
      "Returns (sigma_y, optimal interrogation time).");

  m.def("run", &run_command, py::arg("command"), py::arg("params"),
        "Runs a CLI command in-process without writing files; returns the JSON text.");
}
