#include "qfilter/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace qfilter {

namespace {

void require_finite(const CVector& v, const char* what, std::size_t step) {
  if (!v.allFinite()) throw NumericalError(std::string(what) + " produced a non-finite state", step);
}

void require_channels(const ModelSpec& model, std::span<const double> values, const char* where) {
  if (values.size() != model.n_channels()) {
    throw DimensionError(std::string(where) + ": expected " + std::to_string(model.n_channels()) +
                         " channel values, got " + std::to_string(values.size()));
  }
}

double re_expect(const Basis& basis, const Operator& L, const CVector& v) {
  return inner(basis, v, L.apply(v)).real();
}

// Boundary amplitude in orthonormal coordinates.
double boundary_amplitude(const StateVector& s) {
  const CVector& a = s.amplitudes();
  return std::sqrt(s.basis().weight()) * std::max(std::abs(a[0]), std::abs(a[a.size() - 1]));
}

constexpr double kRescaleLog = 64.0;
constexpr double kBoundaryAmplitude = 1e-6;

}  // namespace

std::string_view to_string(Scheme s) {
  switch (s) {
    case Scheme::nonlinear:
      return "nonlinear";
    case Scheme::linear:
      return "linear";
    case Scheme::gauge:
      return "gauge";
  }
  return "unknown";
}

Scheme parse_scheme(std::string_view name) {
  if (name == "nonlinear") return Scheme::nonlinear;
  if (name == "linear") return Scheme::linear;
  if (name == "gauge") return Scheme::gauge;
  throw ValidationError("sim.scheme", "unknown scheme '" + std::string(name) + "'");
}

NonlinearStep step_nonlinear(const StateVector& state, const ModelSpec& model, std::span<const double> dW, double dt,
                             std::size_t step_index) {
  require_same_basis(state.basis(), model.basis, "step_nonlinear");
  require_channels(model, dW, "step_nonlinear");
  const Basis& basis = state.basis();
  const CVector& phi = state.amplitudes();

  CVector drift = Complex(0.0, -1.0 / model.hbar) * model.hamiltonian.apply(phi);
  CVector noise = CVector::Zero(phi.size());
  for (std::size_t j = 0; j < model.n_channels(); ++j) {
    const Operator& L = model.channels[j];
    const double a = re_expect(basis, L, phi);
    const CVector u = L.apply(phi) - a * phi;        // L~ phi
    const CVector v = L.apply_adjoint(u) - a * u;    // L~^dag L~ phi
    drift -= 0.5 * v;
    noise += dW[j] * u;
  }
  CVector out = phi + dt * drift + noise;
  require_finite(out, "step_nonlinear", step_index);
  const double n = weighted_norm(basis, out);
  if (!(n > 0.0) || !std::isfinite(n)) throw NumericalError("step_nonlinear: degenerate norm", step_index);
  out /= n;
  return {StateVector(basis, std::move(out)), n};
}

StateVector step_linear(const StateVector& chi, const ModelSpec& model, std::span<const double> dY, double dt,
                        std::size_t step_index) {
  require_same_basis(chi.basis(), model.basis, "step_linear");
  require_channels(model, dY, "step_linear");
  const CVector& v = chi.amplitudes();
  CVector out = v - dt * model.K.apply(v);
  for (std::size_t j = 0; j < model.n_channels(); ++j) out += dY[j] * model.channels[j].apply(v);
  require_finite(out, "step_linear", step_index);
  return {chi.basis(), std::move(out)};
}

double step_amplitude(double log_c, std::span<const double> re_expect, std::span<const double> dY, double dt) {
  if (re_expect.size() != dY.size()) throw DimensionError("step_amplitude: channel count mismatch");
  for (std::size_t j = 0; j < dY.size(); ++j) log_c += re_expect[j] * dY[j] - re_expect[j] * re_expect[j] * dt;
  if (!std::isfinite(log_c)) throw NumericalError("step_amplitude: non-finite log amplitude", 0);
  return log_c;
}

RVector gauge_exponent(const ModelSpec& model, std::span<const double> Q) {
  require_channels(model, Q, "gauge_exponent");
  RVector s = RVector::Zero(static_cast<Eigen::Index>(model.dim()));
  for (std::size_t j = 0; j < model.n_channels(); ++j) {
    const Operator& L = model.channels[j];
    if (L.structure() != Structure::diagonal) {
      throw UnsupportedError("gauge solver requires diagonal measurement channels");
    }
    if (!L.is_hermitian() && L.diag().imag().cwiseAbs().maxCoeff() > Operator::kHermitianTol) {
      throw UnsupportedError("gauge solver requires hermitian measurement channels");
    }
    s += Q[j] * L.diag().real();
  }
  return s;
}

Operator gauge_generator(const ModelSpec& model, std::span<const double> Q) {
  const RVector s = gauge_exponent(model, Q);
  Operator base = model.K;
  for (const auto& L : model.channels) base = base + Complex(0.5) * (L * L);
  return base.conjugated_by_diagonal(s);
}

StateVector step_gauge(const StateVector& psi, const ModelSpec& model, std::span<const double> Y_mid, double dt,
                       GaugeIntegrator integrator, std::size_t step_index) {
  require_same_basis(psi.basis(), model.basis, "step_gauge");
  const Operator G = gauge_generator(model, Y_mid);
  const CVector& v = psi.amplitudes();
  const CVector k1 = -G.apply(v);
  CVector out;
  if (integrator == GaugeIntegrator::euler) {
    out = v + dt * k1;
  } else {
    const CVector k2 = -G.apply(v + dt * k1);
    out = v + 0.5 * dt * (k1 + k2);
  }
  require_finite(out, "step_gauge", step_index);
  return {psi.basis(), std::move(out)};
}

Reconstruction reconstruct_posterior(const StateVector& psi, std::span<const double> Y_cumulative,
                                     const ModelSpec& model) {
  require_same_basis(psi.basis(), model.basis, "reconstruct_posterior");
  const RVector s = gauge_exponent(model, Y_cumulative);
  const CVector& p = psi.amplitudes();
  const Eigen::Index n = p.size();

  double top = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mag = std::abs(p[i]);
    if (mag > 0.0) top = std::max(top, s[i] + std::log(mag));
  }
  if (!std::isfinite(top)) throw ContractError("reconstruct_posterior: degenerate (all-zero) state");

  CVector chi(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mag = std::abs(p[i]);
    chi[i] = mag > 0.0 ? std::exp(s[i] + std::log(mag) - top) * (p[i] / mag) : Complex{};
  }
  const double scaled_norm = weighted_norm(psi.basis(), chi);
  return {StateVector(psi.basis(), chi / scaled_norm), top + std::log(scaled_norm)};
}

const std::vector<double>& TrajectoryResult::expectation(std::string_view name) const {
  for (const auto& [n, series] : expectations) {
    if (n == name) return series;
  }
  throw ValidationError("sim.observables", "no stored observable named '" + std::string(name) + "'");
}

TrajectoryResult run_trajectory(std::shared_ptr<const ModelSpec> model_ptr, const StateVector& initial,
                                const TrajectoryOptions& opt, const NoisePath& noise) {
  if (!model_ptr) throw ContractError("run_trajectory: null model");
  const ModelSpec& model = *model_ptr;
  require_same_basis(initial.basis(), model.basis, "run_trajectory");
  if (!initial.is_normalized(1e-9)) throw ContractError("run_trajectory: initial state must be normalized");
  if (!(opt.dt > 0.0)) throw ValidationError("sim.dt", "dt must be positive");
  if (opt.record_stride == 0) throw ValidationError("sim.record_stride", "record_stride must be >= 1");
  if (noise.n_steps != opt.n_steps || noise.n_channels != model.n_channels()) {
    throw DimensionError("run_trajectory: noise path shape does not match options/model");
  }
  if (std::abs(noise.dt - opt.dt) > 1e-12 * opt.dt) throw DimensionError("run_trajectory: noise dt mismatch");
  for (const auto& obs : opt.observables) require_same_basis(obs.op.basis(), model.basis, "observable");

  const std::size_t n = opt.n_steps;
  const std::size_t nc = model.n_channels();
  const double dt = opt.dt;
  const Basis& basis = model.basis;
  const std::string scheme_name(to_string(opt.scheme));

  TrajectoryResult res;
  res.model = model_ptr;
  res.scheme = opt.scheme;
  res.dt = dt;
  res.n_steps = n;
  res.record_stride = opt.record_stride;
  res.master_seed = noise.master_seed;
  res.trajectory_index = noise.trajectory_index;
  res.record = make_record(dt, n, nc);
  res.log_amplitude.assign(n + 1, 0.0);
  res.norm_pre.assign(n + 1, 1.0);
  if (opt.scheme != Scheme::nonlinear) res.log_norm.assign(n + 1, 0.0);
  for (const auto& obs : opt.observables) res.expectations.emplace_back(obs.name, std::vector<double>{});

  StateVector posterior = initial;
  StateVector raw = initial;  // chi (linear) or psi (gauge), scaled by exp(raw_scale)
  double raw_scale = 0.0;
  bool boundary_warned = false;

  auto store = [&](std::size_t k) {
    res.stored_steps.push_back(k);
    res.times.push_back(static_cast<double>(k) * dt);
    for (std::size_t o = 0; o < opt.observables.size(); ++o) {
      res.expectations[o].second.push_back(expectation(posterior, opt.observables[o].op).real());
    }
    if (opt.store_raw) {
      res.raw_states.push_back(raw);
      res.raw_log_scale.push_back(raw_scale);
    }
    if (basis.is_grid() && !boundary_warned && boundary_amplitude(posterior) > kBoundaryAmplitude) {
      boundary_warned = true;
      res.warnings.push_back("boundary amplitude exceeds 1e-6 at t = " + std::to_string(static_cast<double>(k) * dt) +
                             "; widen the grid");
    }
    res.states.push_back(posterior);
  };

  auto rescale_raw = [&]() {
    const double nr = raw.norm();
    if (!(nr > 0.0)) throw NumericalError("unnormalized solution collapsed to zero", 0, scheme_name);
    if (std::abs(std::log(nr)) > kRescaleLog) {
      raw.amplitudes() /= nr;
      raw_scale += std::log(nr);
    }
  };

  std::vector<double> a(nc);
  store(0);
  try {
    for (std::size_t k = 0; k < n; ++k) {
      for (std::size_t j = 0; j < nc; ++j) a[j] = re_expect(basis, model.channels[j], posterior.amplitudes());
      append_increment(res.record, k, a, noise.row(k));
      const auto dY = res.record.increment(k);
      res.log_amplitude[k + 1] = step_amplitude(res.log_amplitude[k], a, dY, dt);

      switch (opt.scheme) {
        case Scheme::nonlinear: {
          auto r = step_nonlinear(posterior, model, noise.row(k), dt, k);
          posterior = std::move(r.state);
          res.norm_pre[k + 1] = r.norm_before;
          break;
        }
        case Scheme::linear: {
          raw = step_linear(raw, model, dY, dt, k);
          rescale_raw();
          const double nr = raw.norm();
          res.log_norm[k + 1] = raw_scale + std::log(nr);
          posterior = StateVector(basis, raw.amplitudes() / nr);
          break;
        }
        case Scheme::gauge: {
          std::vector<double> y_mid(nc);
          const auto y0 = res.record.cumulative(k);
          for (std::size_t j = 0; j < nc; ++j) y_mid[j] = y0[j] + 0.5 * dY[j];
          raw = step_gauge(raw, model, y_mid, dt, opt.gauge_integrator, k);
          rescale_raw();
          auto rec = reconstruct_posterior(raw, res.record.cumulative(k + 1), model);
          posterior = std::move(rec.state);
          res.log_norm[k + 1] = raw_scale + rec.log_c;
          break;
        }
      }
      if (opt.scheme != Scheme::nonlinear) res.norm_pre[k + 1] = std::exp(res.log_norm[k + 1] - res.log_norm[k]);
      if ((k + 1) % opt.record_stride == 0 || k + 1 == n) store(k + 1);
    }
  } catch (const NumericalError& e) {
    throw NumericalError(e.what(), e.step(), scheme_name);
  }
  return res;
}

TrajectoryResult run_trajectory(std::shared_ptr<const ModelSpec> model, const StateVector& initial,
                                const TrajectoryOptions& options, std::uint64_t master_seed,
                                std::uint64_t trajectory_index) {
  if (!model) throw ContractError("run_trajectory: null model");
  const NoisePath noise =
      generate_noise(master_seed, trajectory_index, options.dt, options.n_steps, model->n_channels());
  return run_trajectory(std::move(model), initial, options, noise);
}

DensityTrajectory solve_master(const ModelSpec& model, const DensityMatrix& rho0, double dt, std::size_t n_steps,
                               std::size_t record_stride, std::size_t cap) {
  require_same_basis(model.basis, rho0.basis(), "solve_master");
  if (model.dim() > cap) throw UnsupportedError("solve_master: dimension exceeds oracle cap");
  if (!(dt > 0.0)) throw ValidationError("sim.dt", "dt must be positive");
  if (record_stride == 0) throw ValidationError("sim.record_stride", "record_stride must be >= 1");

  const CMatrix K = model.K.to_dense();
  const CMatrix Kd = K.adjoint();
  std::vector<CMatrix> Ls, Lds;
  for (const auto& L : model.channels) {
    Ls.push_back(L.to_dense());
    Lds.push_back(Ls.back().adjoint());
  }
  auto rhs = [&](const CMatrix& r) {
    CMatrix out = -(K * r + r * Kd);
    for (std::size_t j = 0; j < Ls.size(); ++j) out += Ls[j] * r * Lds[j];
    return out;
  };

  DensityTrajectory traj;
  traj.dt = dt;
  traj.generator = K;
  CMatrix rho = rho0.entries();
  const Complex tr0 = rho.trace();
  traj.times.push_back(0.0);
  traj.states.push_back(DensityMatrix::unchecked(model.basis, rho));
  for (std::size_t k = 0; k < n_steps; ++k) {
    const CMatrix k1 = rhs(rho);
    const CMatrix k2 = rhs(rho + 0.5 * dt * k1);
    const CMatrix k3 = rhs(rho + 0.5 * dt * k2);
    const CMatrix k4 = rhs(rho + dt * k3);
    rho += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!rho.allFinite() || std::abs(rho.trace() - tr0) > kMasterTraceDrift) {
      throw NumericalError("solve_master: trace drift exceeds 1e-6; reduce dt", k + 1, "master");
    }
    if ((k + 1) % record_stride == 0 || k + 1 == n_steps) {
      traj.times.push_back(static_cast<double>(k + 1) * dt);
      traj.states.push_back(DensityMatrix::unchecked(model.basis, rho));
    }
  }
  return traj;
}

namespace {

// Solves the tridiagonal system (lower, diag, upper) x = rhs in place (Thomas algorithm).
void thomas_solve(const CVector& lower, const CVector& diag, const CVector& upper, CVector& x) {
  const Eigen::Index n = diag.size();
  CVector c(n), d(n);
  c[0] = n > 1 ? upper[0] / diag[0] : Complex{};
  d[0] = x[0] / diag[0];
  for (Eigen::Index i = 1; i < n; ++i) {
    const Complex m = diag[i] - lower[i - 1] * c[i - 1];
    c[i] = i + 1 < n ? upper[i] / m : Complex{};
    d[i] = (x[i] - lower[i - 1] * d[i - 1]) / m;
  }
  x[n - 1] = d[n - 1];
  for (Eigen::Index i = n - 2; i >= 0; --i) x[i] = d[i] - c[i] * x[i + 1];
}

}  // namespace

StateVector solve_unitary(const ModelSpec& model, const StateVector& psi0, double t, std::size_t grid_steps,
                          std::size_t cap) {
  require_same_basis(model.basis, psi0.basis(), "solve_unitary");
  const Operator& H = model.hamiltonian;
  if (model.is_grid() && H.structure() != Structure::dense) {
    if (grid_steps == 0) throw ValidationError("grid_steps", "must be >= 1");
    const double dt = t / static_cast<double>(grid_steps);
    const Complex a(0.0, 0.5 * dt / model.hbar);
    const Eigen::Index n = static_cast<Eigen::Index>(model.dim());
    const CVector lo = H.structure() == Structure::tridiagonal ? CVector(a * H.lower()) : CVector::Zero(n - 1);
    const CVector up = H.structure() == Structure::tridiagonal ? CVector(a * H.upper()) : CVector::Zero(n - 1);
    const CVector di = CVector::Ones(n) + a * H.diag();
    CVector v = psi0.amplitudes();
    for (std::size_t k = 0; k < grid_steps; ++k) {
      // (I - a H) v
      CVector rhs = 2.0 * v - (di.array() * v.array()).matrix();
      rhs.tail(n - 1) -= lo.cwiseProduct(v.head(n - 1));
      rhs.head(n - 1) -= up.cwiseProduct(v.tail(n - 1));
      thomas_solve(lo, di, up, rhs);
      v = std::move(rhs);
    }
    return {psi0.basis(), std::move(v)};
  }
  if (model.dim() > cap) throw UnsupportedError("solve_unitary: dimension exceeds oracle cap without grid structure");
  const Operator U = matrix_exp(H, Complex(0.0, -t / model.hbar), cap);
  return U.apply(psi0);
}

}  // namespace qfilter
