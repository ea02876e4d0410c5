#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "qfilter/analysis.hpp"
#include "qfilter/commands.hpp"
#include "qfilter/config.hpp"
#include "qfilter/io.hpp"
#include "qfilter/verify.hpp"

namespace py = pybind11;
using namespace qfilter;

namespace {

// pybind11 holders cannot be pointers to const; the library takes the const view.
using ModelPtr = std::shared_ptr<ModelSpec>;

// Rows are stored states, columns are basis amplitudes.
CMatrix stack_states(const std::vector<StateVector>& states) {
  if (states.empty()) return {};
  CMatrix out(Eigen::Index(states.size()), Eigen::Index(states.front().dim()));
  for (std::size_t k = 0; k < states.size(); ++k) out.row(Eigen::Index(k)) = states[k].amplitudes().transpose();
  return out;
}

StateVector as_state(const ModelSpec& model, const CVector& amplitudes) {
  if (std::size_t(amplitudes.size()) != model.dim()) throw DimensionError("state has the wrong dimension");
  return StateVector(model.basis, amplitudes);
}

std::vector<CMatrix> density_entries(const std::vector<DensityMatrix>& states) {
  std::vector<CMatrix> out;
  for (const auto& r : states) out.push_back(r.entries());
  return out;
}

py::dict trajectory_dict(const TrajectoryResult& r) {
  py::dict d;
  d["scheme"] = std::string(to_string(r.scheme));
  d["dt"] = r.dt;
  d["n_steps"] = r.n_steps;
  d["times"] = r.times;
  d["states"] = stack_states(r.states);
  py::dict ex;
  for (const auto& [name, series] : r.expectations) ex[py::str(name)] = series;
  d["expectations"] = ex;
  d["log_amplitude"] = r.log_amplitude;
  d["log_norm"] = r.log_norm;
  d["norm_pre"] = r.norm_pre;
  d["dY"] = r.record.dY;
  d["Y"] = r.record.Y;
  d["warnings"] = r.warnings;
  return d;
}

std::vector<NamedObservable> observables_from(const ModelSpec& model, const std::map<std::string, CMatrix>& obs) {
  std::vector<NamedObservable> out;
  for (const auto& [name, m] : obs) out.push_back({name, Operator::dense(model.basis, m, Hermiticity::hermitian)});
  return out;
}

int exit_code(ExitCode c) { return static_cast<int>(c); }

}  // namespace

PYBIND11_MODULE(_qfilter, m) {
  m.doc() = "Continuous-measurement stochastic wave equation simulator";

  // Later registrations are tried first, so the base class goes first.
  auto& base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
  py::register_exception<NumericalError>(m, "NumericalError", base.ptr());

  py::class_<ModelSpec, ModelPtr>(m, "Model")
      .def_property_readonly("dim", &ModelSpec::dim)
      .def_property_readonly("n_channels", &ModelSpec::n_channels)
      .def_property_readonly("is_grid", &ModelSpec::is_grid)
      .def_readonly("lambda_", &ModelSpec::lambda)
      .def_readonly("hbar", &ModelSpec::hbar)
      .def_property_readonly("hamiltonian", [](const ModelSpec& s) { return s.hamiltonian.to_dense(); })
      .def_property_readonly("K", [](const ModelSpec& s) { return s.K.to_dense(); })
      .def_property_readonly("channels", [](const ModelSpec& s) {
        std::vector<CMatrix> out;
        for (const auto& L : s.channels) out.push_back(L.to_dense());
        return out;
      })
      .def_property_readonly("coordinates", [](const ModelSpec& s) { return s.basis.grid_spec().coordinates(); });

  m.def(
      "qubit_model",
      [](std::array<double, 3> h, double lambda, const std::string& channel, double hbar) {
        std::optional<Operator> op;
        if (channel == "sigma_x") op = sigma_x();
        else if (channel == "sigma_y") op = sigma_y();
        else if (channel == "sigma_z") op = sigma_z();
        else throw ValidationError("channel", "expected sigma_x, sigma_y or sigma_z");
        return std::make_shared<ModelSpec>(build_qubit_model(h, lambda, op, hbar));
      },
      py::arg("h"), py::arg("lambda_"), py::arg("channel") = "sigma_z", py::arg("hbar") = 1.0);

  m.def(
      "grid_model",
      [](double x_min, double x_max, std::size_t n_points, double lambda, const std::string& potential,
         double omega, double mass, double hbar) {
        const Grid g{x_min, x_max, n_points};
        GridPotential v = GridPotential::free(g);
        if (potential == "harmonic") v = GridPotential::harmonic(g, omega, mass);
        else if (potential != "free") throw ValidationError("potential", "expected free or harmonic");
        return std::make_shared<ModelSpec>(build_grid_model(g, v, mass, lambda, hbar));
      },
      py::arg("x_min"), py::arg("x_max"), py::arg("n_points"), py::arg("lambda_"), py::arg("potential") = "free",
      py::arg("omega") = 1.0, py::arg("mass") = 1.0, py::arg("hbar") = 1.0);

  m.def(
      "gaussian_packet",
      [](const ModelPtr& model, double x0, double p0, double sigma) {
        return CVector(gaussian_packet(model->basis, x0, p0, sigma, model->hbar).amplitudes());
      },
      py::arg("model"), py::arg("x0"), py::arg("p0") = 0.0, py::arg("sigma") = 1.0);

  m.def(
      "run_trajectory",
      [](const ModelPtr& model, const CVector& psi0, double dt, std::size_t n_steps, const std::string& scheme,
         std::uint64_t seed, std::uint64_t index, std::size_t record_stride,
         const std::map<std::string, CMatrix>& observables) {
        TrajectoryOptions o;
        o.dt = dt;
        o.n_steps = n_steps;
        o.scheme = parse_scheme(scheme);
        o.record_stride = record_stride;
        o.observables = observables_from(*model, observables);
        return trajectory_dict(run_trajectory(model, as_state(*model, psi0), o, seed, index));
      },
      py::arg("model"), py::arg("psi0"), py::arg("dt"), py::arg("n_steps"), py::arg("scheme") = "nonlinear",
      py::arg("seed") = 0, py::arg("index") = 0, py::arg("record_stride") = 10,
      py::arg("observables") = std::map<std::string, CMatrix>{});

  m.def(
      "solve_master",
      [](const ModelPtr& model, const CMatrix& rho0, double dt, std::size_t n_steps, std::size_t record_stride) {
        const auto r = solve_master(*model, DensityMatrix(model->basis, rho0), dt, n_steps, record_stride);
        return py::make_tuple(r.times, density_entries(r.states));
      },
      py::arg("model"), py::arg("rho0"), py::arg("dt"), py::arg("n_steps"), py::arg("record_stride") = 1);

  m.def(
      "solve_unitary",
      [](const ModelPtr& model, const CVector& psi0, double t, std::size_t grid_steps) {
        return CVector(solve_unitary(*model, as_state(*model, psi0), t, grid_steps).amplitudes());
      },
      py::arg("model"), py::arg("psi0"), py::arg("t"), py::arg("grid_steps") = 1000);

  m.def(
      "generate_noise",
      [](std::uint64_t seed, std::uint64_t index, double dt, std::size_t n_steps, std::size_t n_channels) {
        return RMatrix(generate_noise(seed, index, dt, n_steps, n_channels).dW);
      },
      py::arg("seed"), py::arg("index"), py::arg("dt"), py::arg("n_steps"), py::arg("n_channels") = 1);

  m.def(
      "strong_order",
      [](const ModelPtr& model, const CVector& psi0, std::vector<double> dts, std::size_t n_seeds,
         const std::string& scheme, std::uint64_t seed, double t_final) {
        StrongOrderOptions o;
        o.dts = std::move(dts);
        o.n_seeds = n_seeds;
        o.scheme = parse_scheme(scheme);
        o.master_seed = seed;
        o.t_final = t_final;
        const auto r = strong_order_estimate(model, as_state(*model, psi0), o);
        py::dict d;
        d["slope"] = r.slope;
        d["standard_error"] = r.standard_error;
        d["dts"] = r.dts;
        d["errors"] = r.mean_errors;
        return d;
      },
      py::arg("model"), py::arg("psi0"), py::arg("dts"), py::arg("n_seeds") = 32, py::arg("scheme") = "nonlinear",
      py::arg("seed") = 0, py::arg("t_final") = 0.5);

  m.def(
      "verify",
      [](const std::string& suite, const std::filesystem::path& config, const std::vector<std::string>& overrides,
         std::size_t threads) {
        return run_suite(suite, parse_config(config, overrides), threads).to_json().dump();
      },
      py::arg("suite"), py::arg("config"), py::arg("overrides") = std::vector<std::string>{}, py::arg("threads") = 0,
      "Runs a verification suite and returns the report as a JSON string.");

  m.def(
      "simulate",
      [](const std::filesystem::path& config, const std::filesystem::path& out, std::optional<std::uint64_t> seed,
         std::optional<std::size_t> trajectories, std::vector<std::string> overrides, std::size_t threads) {
        SimulateArgs a{config, out, seed, trajectories, std::move(overrides), threads};
        return exit_code(cmd_simulate(a));
      },
      py::arg("config"), py::arg("out"), py::arg("seed") = py::none(), py::arg("trajectories") = py::none(),
      py::arg("overrides") = std::vector<std::string>{}, py::arg("threads") = 0);

  m.def(
      "master",
      [](const std::filesystem::path& config, const std::filesystem::path& out, const std::vector<std::string>& ov) {
        return exit_code(cmd_master(config, out, ov));
      },
      py::arg("config"), py::arg("out"), py::arg("overrides") = std::vector<std::string>{});

  m.def(
      "export_plot",
      [](const std::filesystem::path& run, const std::string& what, const std::filesystem::path& out) {
        return exit_code(cmd_export_plot(run, what, out));
      },
      py::arg("run"), py::arg("what"), py::arg("out"));

  m.def("version", &version_string);
}
