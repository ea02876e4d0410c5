#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "qfilter/model.hpp"
#include "qfilter/stochastic.hpp"

namespace qfilter {

// nonlinear: normalized posterior equation driven by the innovation.
// linear:    unnormalized equation driven by the output record.
// gauge:     deterministic complex-potential equation for exp(-L Y) chi, reconstructed each step.
enum class Scheme { nonlinear, linear, gauge };

std::string_view to_string(Scheme s);
Scheme parse_scheme(std::string_view name);

struct NonlinearStep {
  StateVector state;
  double norm_before = 1.0;  // norm of the raw Euler-Maruyama update
};

// Euler-Maruyama step of the normalized posterior equation with
// L~_j = L_j - Re<L_j> I evaluated at the incoming state, then renormalized.
NonlinearStep step_nonlinear(const StateVector& state, const ModelSpec& model, std::span<const double> dW, double dt,
                             std::size_t step_index = 0);

// chi + (-K chi) dt + sum_j L_j chi dY_j. No renormalization.
StateVector step_linear(const StateVector& chi, const ModelSpec& model, std::span<const double> dY, double dt,
                        std::size_t step_index = 0);

// ln c + sum_j [a_j dY_j - a_j^2 dt] with a_j = Re<L_j> at the current posterior.
double step_amplitude(double log_c, std::span<const double> re_expect, std::span<const double> dY, double dt);

enum class GaugeIntegrator { euler, heun };

// Exponent s = sum_j diag(L_j) Q_j of the record gauge exp(L.Q). Channels must be
// diagonal and hermitian.
RVector gauge_exponent(const ModelSpec& model, std::span<const double> Q);

// G(Q) = exp(-L.Q) (K + L^2/2) exp(L.Q).
Operator gauge_generator(const ModelSpec& model, std::span<const double> Q);

// One deterministic step psi <- psi - G(Q) psi dt with Q the mid-step record value.
StateVector step_gauge(const StateVector& psi, const ModelSpec& model, std::span<const double> Y_mid, double dt,
                       GaugeIntegrator integrator = GaugeIntegrator::euler, std::size_t step_index = 0);

struct Reconstruction {
  StateVector state;  // normalized posterior
  double log_c = 0.0; // ln || exp(L.Y) psi ||
};

// chi = exp(L.Y) psi evaluated with the largest exponent factored out.
Reconstruction reconstruct_posterior(const StateVector& psi, std::span<const double> Y_cumulative,
                                     const ModelSpec& model);

struct NamedObservable {
  std::string name;
  Operator op;
};

struct TrajectoryOptions {
  double dt = 1e-3;
  std::size_t n_steps = 1000;
  Scheme scheme = Scheme::nonlinear;
  std::size_t record_stride = 10;
  std::vector<NamedObservable> observables;
  GaugeIntegrator gauge_integrator = GaugeIntegrator::euler;
  // Keep the unnormalized solution (chi for linear, psi for gauge) at each stored step.
  bool store_raw = false;
};

struct TrajectoryResult {
  std::shared_ptr<const ModelSpec> model;
  Scheme scheme = Scheme::nonlinear;
  double dt = 0.0;
  std::size_t n_steps = 0;
  std::size_t record_stride = 1;
  std::uint64_t master_seed = 0;
  std::uint64_t trajectory_index = 0;

  std::vector<std::size_t> stored_steps;
  std::vector<double> times;
  std::vector<StateVector> states;  // normalized posterior at stored steps
  std::vector<std::pair<std::string, std::vector<double>>> expectations;  // at stored steps

  // Per-step series of length n_steps + 1.
  std::vector<double> log_amplitude;  // ln c from the amplitude equation
  std::vector<double> log_norm;       // ln ||chi|| of the unnormalized solution (linear/gauge)
  std::vector<double> norm_pre;       // raw step norm ratio (1 at t = 0)

  // Unnormalized solution at stored steps when requested: amplitudes times exp(raw_log_scale).
  std::vector<StateVector> raw_states;
  std::vector<double> raw_log_scale;

  MeasurementRecord record;
  std::vector<std::string> warnings;

  const std::vector<double>& expectation(std::string_view name) const;
  const StateVector& final_state() const { return states.back(); }
};

// Innovation-first integration over the supplied Wiener path.
TrajectoryResult run_trajectory(std::shared_ptr<const ModelSpec> model, const StateVector& initial,
                                const TrajectoryOptions& options, const NoisePath& noise);

// Same, with noise generated from (master_seed, trajectory_index).
TrajectoryResult run_trajectory(std::shared_ptr<const ModelSpec> model, const StateVector& initial,
                                const TrajectoryOptions& options, std::uint64_t master_seed,
                                std::uint64_t trajectory_index);

struct DensityTrajectory {
  double dt = 0.0;
  CMatrix generator;  // dense K of the model that produced it
  std::vector<double> times;
  std::vector<DensityMatrix> states;
};

inline constexpr double kMasterTraceDrift = 1e-6;

// Classical RK4 on d rho/dt = -(K rho + rho K^dag) + sum_j L_j rho L_j^dag.
DensityTrajectory solve_master(const ModelSpec& model, const DensityMatrix& rho0, double dt, std::size_t n_steps,
                               std::size_t record_stride = 1, std::size_t cap = kDefaultOracleCap);

// exp(-i H t / hbar) psi0. Grid models use Crank-Nicolson with `grid_steps` steps.
StateVector solve_unitary(const ModelSpec& model, const StateVector& psi0, double t, std::size_t grid_steps = 1000,
                          std::size_t cap = kDefaultOracleCap);

}  // namespace qfilter
