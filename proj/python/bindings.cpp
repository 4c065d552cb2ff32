#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "quasicontact/config.hpp"
#include "quasicontact/errors.hpp"
#include "quasicontact/harness.hpp"
#include "quasicontact/hierarchy.hpp"
#include "quasicontact/simulator.hpp"
#include "quasicontact/stationary_pair.hpp"

namespace py = pybind11;
using namespace qc;

namespace {

py::array_t<double> k1_table(const std::vector<K1State>& states, Eigen::Index marks) {
  py::array_t<double> out({static_cast<py::ssize_t>(states.size()), static_cast<py::ssize_t>(marks)});
  auto v = out.mutable_unchecked<2>();
  for (std::size_t i = 0; i < states.size(); ++i)
    for (Eigen::Index a = 0; a < marks; ++a) v(i, a) = states[i].values[a];
  return out;
}

}  // namespace

PYBIND11_MODULE(_quasicontact, m) {
  m.doc() = "Marked continuous contact model: eigendata, pair correlations, hierarchy, simulation";
  m.attr("__version__") = QC_VERSION;

  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<CriticalityError>(m, "CriticalityError", PyExc_ValueError);
  py::register_exception<StabilityError>(m, "StabilityError", PyExc_ValueError);
  py::register_exception<SingularModeError>(m, "SingularModeError", PyExc_ArithmeticError);
  py::register_exception<EmptySampleError>(m, "EmptySampleError", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  py::class_<MarkSpace>(m, "MarkSpace")
      .def(py::init<std::vector<std::string>, Eigen::VectorXd>(), py::arg("labels"), py::arg("weights"))
      .def_static("single", &MarkSpace::single)
      .def_static("uniform_grid", &MarkSpace::uniform_grid, py::arg("nodes"))
      .def_property_readonly("labels", &MarkSpace::labels)
      .def_property_readonly("weights", &MarkSpace::weights)
      .def("__len__", [](const MarkSpace& s) { return s.size(); });

  py::class_<MarkKernel>(m, "MarkKernel")
      .def(py::init<MarkSpace, Eigen::MatrixXd, Eigen::VectorXd>(), py::arg("space"), py::arg("q"),
           py::arg("mortality") = Eigen::VectorXd())
      .def_property_readonly("space", &MarkKernel::space)
      .def_property_readonly("q", &MarkKernel::q_matrix)
      .def_property_readonly("mortality", &MarkKernel::mortality)
      .def("operator_matrix", &MarkKernel::operator_matrix, py::arg("rescaled") = false);

  py::class_<EigenData>(m, "EigenData")
      .def_readonly("r", &EigenData::r)
      .def_readonly("q", &EigenData::q)
      .def_readonly("q_adj", &EigenData::q_adj)
      .def_readonly("kappa_cr", &EigenData::kappa_cr)
      .def_readonly("spectral_gap", &EigenData::spectral_gap)
      .def_readonly("rescaled", &EigenData::rescaled)
      .def_readonly("iterations", &EigenData::iterations);

  m.def("apply_kernel", &apply_kernel, py::arg("kernel"), py::arg("h"), py::arg("rescaled") = false);
  m.def(
      "leading_eigen",
      [](const MarkKernel& k, bool rescaled, double tol, long max_iter) {
        return leading_eigen(k, rescaled, {tol, max_iter});
      },
      py::arg("kernel"), py::arg("rescaled") = false, py::arg("tol") = 1e-12, py::arg("max_iter") = 100000);
  m.def("asymptotic_density", &asymptotic_density, py::arg("eigen"), py::arg("space"), py::arg("rho"),
        py::arg("h"), py::arg("normalization_tol") = 1e-8);

  py::class_<DispersalKernel>(m, "DispersalKernel")
      .def_static("gaussian", &DispersalKernel::gaussian, py::arg("covariance"),
                  py::arg("mean") = Eigen::VectorXd())
      .def_static("isotropic_gaussian", &DispersalKernel::isotropic_gaussian, py::arg("dim"), py::arg("sigma"))
      .def_static("uniform_ball", &DispersalKernel::uniform_ball, py::arg("dim"), py::arg("radius"))
      .def_static("load_tabulated_csv", &DispersalKernel::load_tabulated_csv, py::arg("path"))
      .def_property_readonly("dim", &DispersalKernel::dim)
      .def_property_readonly("family", &DispersalKernel::family_name)
      .def_property_readonly("mean", &DispersalKernel::mean)
      .def_property_readonly("covariance", &DispersalKernel::covariance)
      .def("density", [](const DispersalKernel& d, std::vector<double> u) { return d.density(u); })
      .def("char_fn", [](const DispersalKernel& d, std::vector<double> p) { return d.char_fn(p); });

  py::class_<CorrelationModel>(m, "CorrelationModel")
      .def_static("critical", [](MarkKernel k, DispersalKernel d) { return CorrelationModel::critical(k, d); },
                  py::arg("kernel"), py::arg("dispersal"))
      .def_static("with_kappa",
                  [](MarkKernel k, DispersalKernel d, double kappa) { return CorrelationModel::with_kappa(k, d, kappa); },
                  py::arg("kernel"), py::arg("dispersal"), py::arg("kappa"))
      .def_readonly("kernel", &CorrelationModel::kernel)
      .def_readonly("dispersal", &CorrelationModel::dispersal)
      .def_readonly("kappa", &CorrelationModel::kappa)
      .def_readonly("eigen", &CorrelationModel::eigen)
      .def("k1_generator", &CorrelationModel::k1_generator);

  m.def("solve_k1", &solve_k1, py::arg("model"), py::arg("rho"), py::arg("criticality_tol") = 1e-9);
  m.def(
      "markless_pair_hat",
      [](const DispersalKernel& d, double rho, std::vector<double> p) { return markless_pair_hat(d, rho, p); },
      py::arg("dispersal"), py::arg("rho"), py::arg("p"));
  m.def(
      "solve_pair_mode",
      [](const CorrelationModel& model, double rho, std::vector<double> p) {
        return solve_pair_mode(model, rho, p).value;
      },
      py::arg("model"), py::arg("rho"), py::arg("p"));
  m.def(
      "radial_pair_profile",
      [](const CorrelationModel& model, double rho, std::vector<double> separations, double p_max, int intervals) {
        std::vector<Eigen::MatrixXd> out;
        for (auto& pt : radial_pair_profile(model, rho, separations, p_max, intervals)) out.push_back(pt.value);
        return out;
      },
      py::arg("model"), py::arg("rho"), py::arg("separations"), py::arg("p_max"), py::arg("intervals") = 20000);
  m.def(
      "pair_on_ray",
      [](const CorrelationModel& model, double rho, double extent, int points_per_axis, std::vector<double> direction,
         std::vector<double> separations) {
        const PairGrid pair = solve_pair_grid(model, rho, MomentumGrid(model.dispersal.dim(), extent, points_per_axis));
        std::vector<Eigen::MatrixXd> out;
        for (auto& pt : pair_ray(pair, direction, separations)) out.push_back(pt.value);
        return out;
      },
      py::arg("model"), py::arg("rho"), py::arg("extent"), py::arg("points_per_axis"), py::arg("direction"),
      py::arg("separations"));
  m.def(
      "criticality_integral",
      [](const DispersalKernel& d, double extent, std::vector<int> refinement) {
        const auto rep = criticality_integral(d, MomentumGrid(d.dim(), extent, refinement.front()), refinement);
        py::dict out;
        std::vector<double> values;
        for (const auto& lvl : rep.sequence) values.push_back(lvl.value);
        out["values"] = values;
        out["last_relative_change"] = rep.last_relative_change;
        out["converged"] = rep.converged();
        out["diverging"] = rep.diverging();
        return out;
      },
      py::arg("dispersal"), py::arg("extent") = 8.0, py::arg("refinement") = std::vector<int>{17, 33, 65});

  m.def("default_time_step", &default_time_step, py::arg("kernel"), py::arg("kappa"));
  m.def(
      "evolve_k1",
      [](const MarkKernel& k, double kappa, const Eigen::VectorXd& initial, double t_end, double dt,
         double sample_interval) {
        if (dt <= 0.0) dt = default_time_step(k, kappa);
        const auto states = evolve_k1(k, kappa, initial, t_end, dt, sample_interval);
        std::vector<double> times;
        for (const auto& s : states) times.push_back(s.time);
        return py::make_tuple(times, k1_table(states, k.size()));
      },
      py::arg("kernel"), py::arg("kappa"), py::arg("initial"), py::arg("t_end"), py::arg("dt") = 0.0,
      py::arg("sample_interval") = 0.0);

  m.def(
      "simulate",
      [](const CorrelationModel& model, double torus_length, double t_end, double rho, const Eigen::VectorXd& h,
         std::size_t replicas, std::uint64_t seed, std::vector<double> sample_times) {
        const SimParams params{model.kernel, model.dispersal, model.kappa, torus_length, t_end, seed, replicas};
        RunOptions opt;
        opt.sample_times = std::move(sample_times);
        std::vector<ObservationLog> logs;
        {
          py::gil_scoped_release release;
          logs = run_replicas(params, PoissonSpec{rho, h}, opt);
        }
        const auto k = static_cast<py::ssize_t>(model.marks());
        const auto s = static_cast<py::ssize_t>(opt.sample_times.size());
        py::array_t<double> counts({static_cast<py::ssize_t>(logs.size()), s, k});
        auto v = counts.mutable_unchecked<3>();
        std::vector<bool> extinct;
        for (std::size_t r = 0; r < logs.size(); ++r) {
          extinct.push_back(logs[r].extinct);
          for (py::ssize_t i = 0; i < s; ++i)
            for (py::ssize_t a = 0; a < k; ++a) v(r, i, a) = static_cast<double>(logs[r].samples[i].counts[a]);
        }
        py::dict out;
        out["times"] = opt.sample_times;
        out["counts"] = counts;
        out["extinct"] = extinct;
        out["volume"] = std::pow(torus_length, model.dispersal.dim());
        return out;
      },
      py::arg("model"), py::arg("torus_length"), py::arg("t_end"), py::arg("rho"), py::arg("h"),
      py::arg("replicas") = 100, py::arg("seed") = 0, py::arg("sample_times") = std::vector<double>{});

  m.def(
      "run",
      [](const std::string& subcommand, const std::string& config_path, std::optional<std::string> out_dir) {
        const auto sub = parse_subcommand(subcommand);
        if (!sub) throw ValidationError("unknown subcommand: " + subcommand);
        auto config = parse_config(config_path);
        apply_overrides(config, {out_dir, std::nullopt, std::nullopt});
        std::ostringstream log;
        const auto res = dispatch(config, *sub, log);
        py::dict out;
        out["exit_code"] = res.exit_code;
        out["directory"] = res.directory.string();
        out["files"] = res.files;
        out["log"] = log.str();
        return out;
      },
      py::arg("subcommand"), py::arg("config"), py::arg("out") = std::nullopt,
      "Run one subcommand from a JSON configuration file, like the command-line tool.");
}
