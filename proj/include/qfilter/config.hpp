#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "qfilter/solvers.hpp"

namespace qfilter {

struct PotentialConfig {
  std::string preset = "free";  // free | harmonic | barrier | table
  double omega = 1.0;
  double height = 0.0;
  double width = 1.0;
  std::vector<double> values;
};

struct ModelConfig {
  std::string kind = "qubit";  // qubit | grid1d
  std::array<double, 3> h_field{1.0, 0.0, 0.0};
  std::string channel = "sigma_z";  // sigma_x | sigma_y | sigma_z
  Grid grid{-10.0, 10.0, 256};
  PotentialConfig potential;
  double mass = 1.0;
};

struct InitialConfig {
  std::vector<Complex> amplitudes;  // qubit
  double x0 = 0.0;                  // grid gaussian
  double p0 = 0.0;
  double sigma = 1.0;
};

struct ObservableConfig {
  std::string name;
  std::optional<CMatrix> matrix;  // custom inline matrix; named presets otherwise
};

struct SimConfig {
  double dt = 0.0;
  double t_final = 0.0;
  Scheme scheme = Scheme::nonlinear;
  std::size_t record_stride = 10;
  std::vector<ObservableConfig> observables;
};

struct EnsembleConfig {
  std::size_t n_trajectories = 1;
  std::uint64_t master_seed = 0;
};

struct OutputConfig {
  std::string directory = "out";
  std::vector<std::string> formats{"csv"};  // csv | record | binary
};

// Parameters of the `verify` suites.
struct VerifyConfig {
  std::size_t n_seeds = 20;
  std::size_t checkpoints = 10;
  std::vector<double> dts{1e-2, 5e-3, 2.5e-3, 1.25e-3};                // order suite
  std::size_t order_seeds = 32;
  double order_t_final = 0.5;
  std::vector<double> filtering_dts{1e-3, 5e-4, 2.5e-4, 1.25e-4};      // filtering suite
  std::size_t filtering_seeds = 4;
  std::string observable;  // filtering suite; default sigma_z (qubit) or x (grid)
};

struct RunConfig {
  ModelConfig model;
  double hbar = 1.0;
  double lambda = 0.0;
  InitialConfig initial;
  SimConfig sim;
  EnsembleConfig ensemble;
  OutputConfig output;
  VerifyConfig verify;
  nlohmann::json resolved;  // the validated document with defaults applied

  std::size_t n_steps() const;
};

// Applies a dotted-path override "a.b.c=value" to a JSON document. The value is
// parsed as JSON when possible, otherwise stored as a string.
void apply_override(nlohmann::json& doc, const std::string& assignment);

RunConfig parse_config(const nlohmann::json& doc, const std::vector<std::string>& overrides = {});
RunConfig parse_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});

std::shared_ptr<const ModelSpec> make_model(const RunConfig& cfg);
StateVector make_initial_state(const RunConfig& cfg, const ModelSpec& model);
std::vector<NamedObservable> make_observables(const RunConfig& cfg, const ModelSpec& model);
// Resolves a single observable by name (x, x2, p, sigma_x/y/z, L, or a configured custom name).
Operator resolve_observable(const RunConfig& cfg, const ModelSpec& model, const std::string& name);

}  // namespace qfilter
