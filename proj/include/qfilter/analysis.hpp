#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qfilter/solvers.hpp"

namespace qfilter {

struct ResidualReport {
  std::vector<double> residuals;
  double mean = 0.0;
  double rms = 0.0;
  double max_abs = 0.0;
  double standard_error = 0.0;  // of the mean residual
  double dt = 0.0;
  Scheme scheme = Scheme::nonlinear;
};

// Per-step residual of the filtering equation for <Z>:
//   r_k = d<Z> - [ -<ZK + K^dag Z - sum L^dag Z L> dt + sum <Z~ L + L^dag Z~> dW ]
// Requires record_stride == 1.
ResidualReport filtering_residual(const TrajectoryResult& traj, const Operator& Z);

struct EnsembleSummary {
  std::size_t n_trajectories = 0;
  std::vector<double> times;
  std::vector<DensityMatrix> mean_projector;
  std::vector<std::string> observable_names;
  std::vector<std::vector<double>> observable_mean;  // [observable][checkpoint]
  std::vector<std::vector<double>> observable_se;
};

// Averages over trajectories that share stored steps. Observables are taken from the stored expectation series.
EnsembleSummary summarize_ensemble(const std::vector<TrajectoryResult>& trajs);

// Trace distance between the mean projector and the master solution at each checkpoint time.
std::vector<double> ensemble_vs_master(const std::vector<TrajectoryResult>& trajs, const DensityTrajectory& master,
                                       const std::vector<double>& checkpoints);

struct CollapseStatistics {
  std::size_t n_trajectories = 0;
  std::vector<double> eigenvalues;  // one per eigenspace of L
  std::vector<std::size_t> counts;
  std::size_t unresolved = 0;
  std::vector<double> frequencies;  // counts / n_trajectories
  std::vector<double> born_weights;
  double unresolved_fraction = 0.0;
  double chi_square = 0.0;
  double p_value = 1.0;
};

inline constexpr double kCollapseThreshold = 0.01;

// Classifies each final state by the eigenspace of the (single, hermitian) channel
// it is within trace distance `threshold` of. Requires H = 0.
CollapseStatistics collapse_statistics(const std::vector<TrajectoryResult>& trajs,
                                       double threshold = kCollapseThreshold);

struct LocalizationSeries {
  std::vector<double> times;
  std::vector<double> mean_x;
  std::vector<double> var_x;
  std::vector<double> mean_p;
};

LocalizationSeries localization_metrics(const TrajectoryResult& traj);

struct StrongOrderOptions {
  std::vector<double> dts;
  std::size_t n_seeds = 32;
  Scheme scheme = Scheme::nonlinear;
  std::uint64_t master_seed = 0;
  double t_final = 0.5;
  std::size_t refinement = 64;
};

struct StrongOrderResult {
  double slope = 0.0;            // least-squares slope of log(geometric mean error over seeds) vs log dt
  double seed_slope_mean = 0.0;  // mean of per-seed slopes
  double standard_error = 0.0;   // of the per-seed slope mean
  std::vector<double> seed_slopes;
  std::vector<double> dts;
  std::vector<double> mean_errors;  // geometric mean over seeds, per dt
};

// Pathwise error, the largest relative deviation at the times of the coarsest grid,
// against a self-reference at min(dts) / refinement on the same Brownian path. For
// the linear and gauge schemes the error is measured on the unnormalized solution.
StrongOrderResult strong_order_estimate(std::shared_ptr<const ModelSpec> model, const StateVector& initial,
                                        const StrongOrderOptions& options);

// Least-squares slope of y against x.
double fit_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace qfilter
