#include "qfilter/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Eigenvalues>
#include <boost/math/distributions/chi_squared.hpp>

namespace qfilter {

namespace {

std::size_t find_time(const std::vector<double>& times, double t) {
  const double tol = 1e-9 * std::max(1.0, std::abs(t));
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (std::abs(times[i] - t) <= tol) return i;
  }
  throw DimensionError("checkpoint t = " + std::to_string(t) + " is not a stored time");
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v, double mean) {
  if (v.size() < 2) return 0.0;
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw ContractError("fit_slope: need >= 2 matching points");
  const double mx = mean_of(x);
  const double my = mean_of(y);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

ResidualReport filtering_residual(const TrajectoryResult& traj, const Operator& Z) {
  if (traj.record_stride != 1) throw UnsupportedError("filtering_residual requires record_stride == 1");
  const ModelSpec& model = *traj.model;
  require_same_basis(Z.basis(), model.basis, "filtering_residual");
  const Basis& basis = model.basis;
  const double dt = traj.dt;

  ResidualReport rep;
  rep.dt = dt;
  rep.scheme = traj.scheme;
  rep.residuals.reserve(traj.n_steps);

  auto zmean = [&](const CVector& v) { return inner(basis, v, Z.apply(v)).real(); };
  for (std::size_t k = 0; k < traj.n_steps; ++k) {
    const CVector& phi = traj.states[k].amplitudes();
    const CVector Zphi = Z.apply(phi);
    const double z = inner(basis, phi, Zphi).real();

    // <ZK + K^dag Z> = 2 Re <Z phi | K phi> for hermitian Z.
    double drift = 2.0 * inner(basis, Zphi, model.K.apply(phi)).real();
    double noise = 0.0;
    for (std::size_t j = 0; j < model.n_channels(); ++j) {
      const CVector Lphi = model.channels[j].apply(phi);
      drift -= inner(basis, Lphi, Z.apply(Lphi)).real();
      // <Z~ L + L^dag Z~> = 2 Re <Z~ phi | L phi>
      const double coeff = 2.0 * (inner(basis, Zphi, Lphi) - z * inner(basis, phi, Lphi)).real();
      noise += coeff * traj.record.dW(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j));
    }
    const double dz = zmean(traj.states[k + 1].amplitudes()) - z;
    rep.residuals.push_back(dz - (-drift * dt + noise));
  }

  rep.mean = mean_of(rep.residuals);
  double ss = 0.0;
  for (double r : rep.residuals) {
    ss += r * r;
    rep.max_abs = std::max(rep.max_abs, std::abs(r));
  }
  rep.rms = rep.residuals.empty() ? 0.0 : std::sqrt(ss / static_cast<double>(rep.residuals.size()));
  rep.standard_error = rep.residuals.empty()
                           ? 0.0
                           : sample_std(rep.residuals, rep.mean) / std::sqrt(static_cast<double>(rep.residuals.size()));
  return rep;
}

EnsembleSummary summarize_ensemble(const std::vector<TrajectoryResult>& trajs) {
  if (trajs.empty()) throw ContractError("summarize_ensemble: no trajectories");
  const TrajectoryResult& first = trajs.front();
  for (const auto& t : trajs) {
    if (t.stored_steps != first.stored_steps || t.expectations.size() != first.expectations.size()) {
      throw DimensionError("summarize_ensemble: trajectories do not share stored steps/observables");
    }
    require_same_basis(t.model->basis, first.model->basis, "summarize_ensemble");
  }
  const double N = static_cast<double>(trajs.size());
  EnsembleSummary s;
  s.n_trajectories = trajs.size();
  s.times = first.times;
  const Basis& basis = first.model->basis;
  const auto dim = static_cast<Eigen::Index>(basis.dim());
  for (std::size_t c = 0; c < first.times.size(); ++c) {
    CMatrix acc = CMatrix::Zero(dim, dim);
    for (const auto& t : trajs) acc += projector(t.states[c]).entries();
    s.mean_projector.push_back(DensityMatrix::unchecked(basis, acc / N));
  }
  for (std::size_t o = 0; o < first.expectations.size(); ++o) {
    s.observable_names.push_back(first.expectations[o].first);
    std::vector<double> means, ses;
    for (std::size_t c = 0; c < first.times.size(); ++c) {
      std::vector<double> vals;
      vals.reserve(trajs.size());
      for (const auto& t : trajs) vals.push_back(t.expectations[o].second[c]);
      const double m = mean_of(vals);
      means.push_back(m);
      ses.push_back(sample_std(vals, m) / std::sqrt(N));
    }
    s.observable_mean.push_back(std::move(means));
    s.observable_se.push_back(std::move(ses));
  }
  return s;
}

std::vector<double> ensemble_vs_master(const std::vector<TrajectoryResult>& trajs, const DensityTrajectory& master,
                                       const std::vector<double>& checkpoints) {
  if (trajs.empty()) throw ContractError("ensemble_vs_master: no trajectories");
  const ModelSpec& model = *trajs.front().model;
  for (const auto& t : trajs) {
    if (t.model != trajs.front().model) throw ContractError("ensemble_vs_master: trajectories use different models");
  }
  if (master.generator.size() > 0) {
    const CMatrix k = model.K.to_dense();
    if (k.rows() != master.generator.rows() || (k - master.generator).cwiseAbs().maxCoeff() > kModelTol) {
      throw ContractError("ensemble_vs_master: master solution was computed for a different model");
    }
  }
  const auto dim = static_cast<Eigen::Index>(model.dim());
  const double N = static_cast<double>(trajs.size());
  std::vector<double> out;
  for (double t : checkpoints) {
    const std::size_t im = find_time(master.times, t);
    CMatrix acc = CMatrix::Zero(dim, dim);
    for (const auto& traj : trajs) {
      const std::size_t it = find_time(traj.times, t);
      acc += projector(traj.states[it]).entries();
    }
    out.push_back(trace_distance(DensityMatrix::unchecked(model.basis, acc / N), master.states[im]));
  }
  return out;
}

CollapseStatistics collapse_statistics(const std::vector<TrajectoryResult>& trajs, double threshold) {
  if (trajs.empty()) throw ContractError("collapse_statistics: no trajectories");
  const ModelSpec& model = *trajs.front().model;
  if (model.n_channels() != 1) throw UnsupportedError("collapse_statistics: exactly one channel required");
  const Operator& L = model.channels.front();
  if (L.hermitian_defect() > Operator::kHermitianTol) throw ContractError("collapse_statistics: L is not hermitian");
  if (!model.hamiltonian.is_zero(kModelTol)) throw ContractError("collapse_statistics: requires H = 0");

  Eigen::SelfAdjointEigenSolver<CMatrix> es(L.to_dense());
  const RVector& evals = es.eigenvalues();
  const CMatrix& evecs = es.eigenvectors();
  const double scale = std::max(1.0, evals.cwiseAbs().maxCoeff());

  // Group (sorted) eigenvalues into eigenspaces.
  std::vector<std::vector<Eigen::Index>> spaces;
  CollapseStatistics st;
  for (Eigen::Index i = 0; i < evals.size(); ++i) {
    if (spaces.empty() || std::abs(evals[i] - st.eigenvalues.back()) > 1e-9 * scale) {
      spaces.push_back({});
      st.eigenvalues.push_back(evals[i]);
    }
    spaces.back().push_back(i);
  }
  const double w = model.basis.weight();
  // Weight of the state inside each eigenspace: sum_i |<e_i|v>|^2 in orthonormal coordinates.
  auto weights = [&](const CVector& v) {
    std::vector<double> out;
    for (const auto& sp : spaces) {
      double p = 0.0;
      for (Eigen::Index i : sp) p += w * std::norm(evecs.col(i).dot(v));
      out.push_back(p);
    }
    return out;
  };

  st.n_trajectories = trajs.size();
  st.counts.assign(spaces.size(), 0);
  st.born_weights = weights(trajs.front().states.front().amplitudes());
  for (const auto& t : trajs) {
    const auto p = weights(t.final_state().amplitudes());
    const auto best = static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
    const double dist = std::sqrt(std::max(0.0, 1.0 - p[best]));
    if (dist <= threshold) {
      ++st.counts[best];
    } else {
      ++st.unresolved;
    }
  }
  const double N = static_cast<double>(st.n_trajectories);
  for (auto c : st.counts) st.frequencies.push_back(static_cast<double>(c) / N);
  st.unresolved_fraction = static_cast<double>(st.unresolved) / N;

  const double resolved = N - static_cast<double>(st.unresolved);
  int dof = -1;
  bool impossible = false;
  for (std::size_t i = 0; i < st.counts.size(); ++i) {
    const double expected = resolved * st.born_weights[i];
    if (st.born_weights[i] <= 1e-12) {
      if (st.counts[i] > 0) impossible = true;
      continue;
    }
    ++dof;
    const double d = static_cast<double>(st.counts[i]) - expected;
    st.chi_square += d * d / expected;
  }
  if (impossible) {
    st.p_value = 0.0;
  } else if (dof <= 0 || resolved == 0.0) {
    st.p_value = 1.0;
  } else {
    const boost::math::chi_squared dist(dof);
    st.p_value = boost::math::cdf(boost::math::complement(dist, st.chi_square));
  }
  return st;
}

LocalizationSeries localization_metrics(const TrajectoryResult& traj) {
  const ModelSpec& model = *traj.model;
  const Operator X = position_operator(model.basis);
  const Operator X2 = position_squared_operator(model.basis);
  const Operator P = momentum_operator(model.basis, model.hbar);
  LocalizationSeries s;
  s.times = traj.times;
  for (const auto& st : traj.states) {
    const double mx = expectation(st, X).real();
    s.mean_x.push_back(mx);
    s.var_x.push_back(expectation(st, X2).real() - mx * mx);
    s.mean_p.push_back(expectation(st, P).real());
  }
  return s;
}

StrongOrderResult strong_order_estimate(std::shared_ptr<const ModelSpec> model, const StateVector& initial,
                                        const StrongOrderOptions& opt) {
  if (opt.dts.size() < 4) throw ValidationError("verify.dts", "strong order estimate needs at least 4 dt values");
  std::vector<double> dts = opt.dts;
  std::sort(dts.begin(), dts.end(), std::greater<>());
  const double ratio = dts[0] / dts[1];
  for (std::size_t i = 1; i + 1 < dts.size(); ++i) {
    if (std::abs(dts[i] / dts[i + 1] - ratio) > 1e-9 * ratio) {
      throw ValidationError("verify.dts", "dt values must form a geometric sequence");
    }
  }
  if (!(ratio > 1.0)) throw ValidationError("verify.dts", "dt values must be distinct");
  if (opt.n_seeds == 0) throw ValidationError("verify.n_seeds", "must be >= 1");

  const double ref_dt = dts.back() / static_cast<double>(opt.refinement);
  auto steps_for = [&](double span, double h, const char* what) {
    const double q = span / h;
    const double r = std::round(q);
    if (r < 1.0 || std::abs(q - r) > 1e-6 * r) {
      throw ValidationError("verify.dts", std::string(what) + " is not an integer multiple of the reference step");
    }
    return static_cast<std::size_t>(r);
  };
  const std::size_t ref_steps = steps_for(opt.t_final, ref_dt, "t_final");
  std::vector<std::size_t> factors;
  for (double h : dts) factors.push_back(steps_for(h, ref_dt, "dt"));
  if (ref_steps % factors.front() != 0) throw ValidationError("verify.dts", "t_final is not a multiple of the largest dt");
  for (std::size_t f : factors) {
    if (factors.front() % f != 0) throw ValidationError("verify.dts", "the largest dt is not a multiple of every dt");
  }

  // Solutions at the times of the coarsest grid, rescaled by the stored log-norm.
  auto path_solution = [&](const NoisePath& noise, std::size_t stride) {
    TrajectoryOptions to;
    to.dt = noise.dt;
    to.n_steps = noise.n_steps;
    to.scheme = opt.scheme;
    to.record_stride = stride;
    auto r = run_trajectory(model, initial, to, noise);
    std::vector<CVector> out;
    for (std::size_t k = 0; k < r.states.size(); ++k) {
      const double log_scale = r.log_norm.empty() ? 0.0 : r.log_norm[r.stored_steps[k]];
      out.push_back(r.states[k].amplitudes() * std::exp(log_scale));
    }
    return out;
  };

  StrongOrderResult res;
  res.dts = dts;
  res.mean_errors.assign(dts.size(), 0.0);
  std::vector<double> logdt;
  for (double h : dts) logdt.push_back(std::log(h));

  for (std::size_t seed = 0; seed < opt.n_seeds; ++seed) {
    const NoisePath fine = generate_noise(opt.master_seed, seed, ref_dt, ref_steps, model->n_channels());
    const auto ref = path_solution(fine, factors.front());
    std::vector<double> logerr;
    for (std::size_t i = 0; i < dts.size(); ++i) {
      const auto path = path_solution(fine.coarsen(factors[i]), factors.front() / factors[i]);
      double err = 0.0;
      for (std::size_t k = 0; k < ref.size(); ++k) {
        err = std::max(err, weighted_norm(model->basis, path[k] - ref[k]) / weighted_norm(model->basis, ref[k]));
      }
      logerr.push_back(std::log(std::max(err, 1e-300)));
      res.mean_errors[i] += logerr.back() / static_cast<double>(opt.n_seeds);
    }
    res.seed_slopes.push_back(fit_slope(logdt, logerr));
  }
  res.slope = fit_slope(logdt, res.mean_errors);
  for (double& e : res.mean_errors) e = std::exp(e);
  res.seed_slope_mean = mean_of(res.seed_slopes);
  res.standard_error =
      sample_std(res.seed_slopes, res.seed_slope_mean) / std::sqrt(static_cast<double>(res.seed_slopes.size()));
  return res;
}

}  // namespace qfilter
