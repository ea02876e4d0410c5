#include "qfilter/verify.hpp"

#include <algorithm>
#include <cmath>

#include "qfilter/analysis.hpp"
#include "qfilter/errors.hpp"
#include "qfilter/parallel.hpp"

namespace qfilter {

namespace {

constexpr double kEquivalenceTol = 1e-2;
constexpr Bound kShrinkBand{1.5, 3.0};
constexpr double kAmplitudeTol = 5e-3;
constexpr double kEnsembleTol = 0.05;
constexpr double kPriorSlack = 0.01;
constexpr double kUnresolvedMax = 0.02;
constexpr double kChiSquareMinP = 1e-3;
constexpr Bound kOrderBand{0.35, 0.65};
constexpr Bound kFilteringBand{1.3, 1.7};
constexpr double kFilteringConstant = 10.0;
constexpr double kSigmas = 3.0;

std::string fmt_dt(double dt) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", dt);
  return buf;
}

std::size_t stride_for(std::size_t n_steps, std::size_t checkpoints) {
  return std::max<std::size_t>(1, n_steps / std::max<std::size_t>(1, checkpoints));
}

std::size_t steps_for(double t_final, double dt) {
  return static_cast<std::size_t>(std::ceil(t_final / dt - 1e-9));
}

// Largest pairwise distance between the stored states of runs sharing stored steps.
double max_pairwise(const std::vector<const TrajectoryResult*>& runs) {
  double worst = 0.0;
  for (std::size_t a = 0; a < runs.size(); ++a)
    for (std::size_t b = a + 1; b < runs.size(); ++b)
      for (std::size_t c = 0; c < runs[a]->states.size(); ++c)
        worst = std::max(worst, pure_trace_distance(runs[a]->states[c], runs[b]->states[c]));
  return worst;
}

std::vector<TrajectoryResult> run_ensemble(std::shared_ptr<const ModelSpec> model, const StateVector& initial,
                                           const TrajectoryOptions& opt, std::uint64_t seed, std::size_t n,
                                           std::size_t threads) {
  std::vector<TrajectoryResult> out(n);
  parallel_for(n, threads, [&](std::size_t i) { out[i] = run_trajectory(model, initial, opt, seed, i); });
  return out;
}

}  // namespace

void VerifyReport::add(std::string name, double measured, Bound bound) {
  const bool ok = std::isfinite(measured) && bound.contains(measured);
  checks.push_back({std::move(name), measured, bound, ok});
}

bool VerifyReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

nlohmann::json VerifyReport::to_json() const {
  auto edge = [](double v) -> nlohmann::json {
    if (std::isinf(v)) return nullptr;
    return v;
  };
  nlohmann::json checks_json = nlohmann::json::array();
  for (const auto& c : checks) {
    checks_json.push_back({{"name", c.name},
                           {"measured", std::isfinite(c.measured) ? nlohmann::json(c.measured) : nlohmann::json()},
                           {"bound", {{"min", edge(c.bound.min)}, {"max", edge(c.bound.max)}}},
                           {"pass", c.pass}});
  }
  return {{"suite", suite}, {"pass", passed()}, {"checks", checks_json}};
}

const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names{"equivalence", "ensemble", "born", "order", "filtering", "gauge"};
  return names;
}

VerifyReport verify_equivalence(const RunConfig& cfg, std::size_t threads) {
  auto model = make_model(cfg);
  const StateVector initial = make_initial_state(cfg, *model);
  const double dt = cfg.sim.dt;
  const std::size_t n = cfg.n_steps();
  const std::size_t stride = stride_for(n, cfg.verify.checkpoints);
  const std::size_t seeds = cfg.verify.n_seeds;

  struct SeedResult {
    double dist_coarse = 0.0;
    double dist_fine = 0.0;
    double amp_dev = 0.0;
  };
  std::vector<SeedResult> per_seed(seeds);

  parallel_for(seeds, threads, [&](std::size_t s) {
    const NoisePath fine = generate_noise(cfg.ensemble.master_seed, s, dt / 2.0, 2 * n, model->n_channels());
    const NoisePath coarse = fine.coarsen(2);
    auto run_all = [&](const NoisePath& noise, std::size_t st) {
      std::vector<TrajectoryResult> r;
      for (Scheme sc : {Scheme::nonlinear, Scheme::linear, Scheme::gauge}) {
        TrajectoryOptions opt;
        opt.dt = noise.dt;
        opt.n_steps = noise.n_steps;
        opt.scheme = sc;
        opt.record_stride = st;
        r.push_back(run_trajectory(model, initial, opt, noise));
      }
      return r;
    };
    const auto rc = run_all(coarse, stride);
    const auto rf = run_all(fine, 2 * stride);
    SeedResult& out = per_seed[s];
    out.dist_coarse = max_pairwise({&rc[0], &rc[1], &rc[2]});
    out.dist_fine = max_pairwise({&rf[0], &rf[1], &rf[2]});
    const TrajectoryResult& lin = rc[1];
    out.amp_dev = std::abs(std::exp(lin.log_amplitude.back() - lin.log_norm.back()) - 1.0);
  });

  VerifyReport rep;
  rep.suite = "equivalence";
  Series ser{"equivalence", {"seed", "max_distance_dt", "max_distance_half_dt", "amplitude_deviation"}, {}};
  double dc = 0.0, df = 0.0, amp = 0.0;
  for (std::size_t s = 0; s < seeds; ++s) {
    dc = std::max(dc, per_seed[s].dist_coarse);
    df = std::max(df, per_seed[s].dist_fine);
    amp = std::max(amp, per_seed[s].amp_dev);
    ser.rows.push_back({double(s), per_seed[s].dist_coarse, per_seed[s].dist_fine, per_seed[s].amp_dev});
  }
  rep.add("max_pairwise_trace_distance", dc, {0.0, kEquivalenceTol});
  rep.add("shrink_factor_half_dt", df > 0.0 ? dc / df : std::numeric_limits<double>::infinity(), kShrinkBand);
  rep.add("amplitude_relative_deviation", amp, {0.0, kAmplitudeTol});
  rep.series.push_back(std::move(ser));
  return rep;
}

VerifyReport verify_gauge(const RunConfig& cfg, std::size_t threads) {
  auto model = make_model(cfg);
  const StateVector initial = make_initial_state(cfg, *model);
  const std::size_t n = cfg.n_steps();
  const std::size_t stride = stride_for(n, cfg.verify.checkpoints);
  std::vector<double> dist(cfg.verify.n_seeds);

  parallel_for(dist.size(), threads, [&](std::size_t s) {
    const NoisePath noise = generate_noise(cfg.ensemble.master_seed, s, cfg.sim.dt, n, model->n_channels());
    TrajectoryOptions opt;
    opt.dt = cfg.sim.dt;
    opt.n_steps = n;
    opt.record_stride = stride;
    opt.scheme = Scheme::linear;
    const auto lin = run_trajectory(model, initial, opt, noise);
    opt.scheme = Scheme::gauge;
    const auto gau = run_trajectory(model, initial, opt, noise);
    dist[s] = max_pairwise({&lin, &gau});
  });

  VerifyReport rep;
  rep.suite = "gauge";
  Series ser{"gauge", {"seed", "max_distance"}, {}};
  for (std::size_t s = 0; s < dist.size(); ++s) ser.rows.push_back({double(s), dist[s]});
  rep.add("max_linear_gauge_trace_distance", *std::max_element(dist.begin(), dist.end()), {0.0, kEquivalenceTol});
  rep.series.push_back(std::move(ser));
  return rep;
}

VerifyReport verify_ensemble(const RunConfig& cfg, std::size_t threads) {
  auto model = make_model(cfg);
  const StateVector initial = make_initial_state(cfg, *model);
  const std::size_t n = cfg.n_steps();
  TrajectoryOptions opt;
  opt.dt = cfg.sim.dt;
  opt.n_steps = n;
  opt.scheme = cfg.sim.scheme;
  opt.record_stride = stride_for(n, cfg.verify.checkpoints);
  opt.observables = make_observables(cfg, *model);

  const auto trajs = run_ensemble(model, initial, opt, cfg.ensemble.master_seed, cfg.ensemble.n_trajectories, threads);
  const DensityMatrix rho0 = projector(initial);
  const auto master = solve_master(*model, rho0, cfg.sim.dt, n, opt.record_stride);

  std::vector<double> checkpoints(trajs.front().times.begin() + 1, trajs.front().times.end());
  const auto dist = ensemble_vs_master(trajs, master, checkpoints);
  const auto summary = summarize_ensemble(trajs);

  VerifyReport rep;
  rep.suite = "ensemble";
  rep.add("max_mean_projector_trace_distance", *std::max_element(dist.begin(), dist.end()), {0.0, kEnsembleTol});
  rep.add("tower_property_t0", trace_distance(summary.mean_projector.front(), rho0), {0.0, 1e-12});

  Series ser{"ensemble", {"t", "trace_distance"}, {}};
  for (std::size_t i = 0; i < checkpoints.size(); ++i) ser.rows.push_back({checkpoints[i], dist[i]});

  // Ensemble mean of each observable against Tr(rho Z) of the master solution, after t = 0.
  for (std::size_t o = 0; o < summary.observable_names.size(); ++o) {
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 1; c < summary.times.size(); ++c) {
      const double prior = master.states[c].expectation(opt.observables[o].op).real();
      const double excess = std::abs(summary.observable_mean[o][c] - prior) - kSigmas * summary.observable_se[o][c];
      worst = std::max(worst, excess);
    }
    rep.add("prior_consistency." + summary.observable_names[o], worst, {-std::numeric_limits<double>::infinity(),
                                                                        kPriorSlack});
  }
  rep.series.push_back(std::move(ser));
  return rep;
}

VerifyReport verify_born(const RunConfig& cfg, std::size_t threads) {
  auto model = make_model(cfg);
  const StateVector initial = make_initial_state(cfg, *model);
  const std::size_t n = cfg.n_steps();
  TrajectoryOptions opt;
  opt.dt = cfg.sim.dt;
  opt.n_steps = n;
  opt.scheme = cfg.sim.scheme;
  opt.record_stride = stride_for(n, cfg.verify.checkpoints);
  opt.observables = {{"L", model->channels.front()}};

  const auto trajs = run_ensemble(model, initial, opt, cfg.ensemble.master_seed, cfg.ensemble.n_trajectories, threads);
  const auto stats = collapse_statistics(trajs);
  const double N = static_cast<double>(stats.n_trajectories);

  VerifyReport rep;
  rep.suite = "born";
  Series ser{"born", {"eigenvalue", "count", "frequency", "born_weight"}, {}};
  for (std::size_t k = 0; k < stats.eigenvalues.size(); ++k) {
    const double p = stats.born_weights[k];
    const double sigma = std::sqrt(p * (1.0 - p) / N);
    rep.add("outcome_frequency[" + std::to_string(k) + "]", stats.frequencies[k],
            {p - kSigmas * sigma, p + kSigmas * sigma});
    ser.rows.push_back({stats.eigenvalues[k], double(stats.counts[k]), stats.frequencies[k], p});
  }
  rep.add("unresolved_fraction", stats.unresolved_fraction, {0.0, kUnresolvedMax});
  rep.add("chi_square_p_value", stats.p_value, {kChiSquareMinP, 1.0});

  const auto summary = summarize_ensemble(trajs);
  const auto& mean = summary.observable_mean.front();
  const auto& se = summary.observable_se.front();
  double worst = 0.0;
  for (std::size_t c = 1; c < mean.size(); ++c) {
    const double dev = std::abs(mean[c] - mean.front());
    worst = std::max(worst, se[c] > 0.0 ? dev / se[c] : (dev > 0.0 ? std::numeric_limits<double>::infinity() : 0.0));
  }
  rep.add("martingale_mean_L_in_standard_errors", worst, {0.0, kSigmas});
  rep.series.push_back(std::move(ser));
  return rep;
}

VerifyReport verify_order(const RunConfig& cfg, std::size_t threads) {
  auto model = make_model(cfg);
  const StateVector initial = make_initial_state(cfg, *model);
  if (cfg.verify.dts.size() < 4) throw ValidationError("verify.dts", "the order suite needs at least 4 dt values");

  std::vector<StrongOrderResult> results(2);
  const Scheme schemes[2] = {Scheme::nonlinear, Scheme::linear};
  parallel_for(2, threads, [&](std::size_t i) {
    StrongOrderOptions o;
    o.dts = cfg.verify.dts;
    o.n_seeds = cfg.verify.order_seeds;
    o.scheme = schemes[i];
    o.master_seed = cfg.ensemble.master_seed;
    o.t_final = cfg.verify.order_t_final;
    results[i] = strong_order_estimate(model, initial, o);
  });

  VerifyReport rep;
  rep.suite = "order";
  Series ser{"order", {"dt", "mean_error_nonlinear", "mean_error_linear"}, {}};
  for (std::size_t k = 0; k < results[0].dts.size(); ++k)
    ser.rows.push_back({results[0].dts[k], results[0].mean_errors[k], results[1].mean_errors[k]});
  for (std::size_t i = 0; i < 2; ++i) {
    const std::string s(to_string(schemes[i]));
    rep.add("strong_order_slope." + s, results[i].slope, kOrderBand);
  }
  rep.series.push_back(std::move(ser));
  return rep;
}

VerifyReport verify_filtering(const RunConfig& cfg, std::size_t threads) {
  auto model = make_model(cfg);
  const StateVector initial = make_initial_state(cfg, *model);
  const Operator Z = resolve_observable(cfg, *model, cfg.verify.observable);
  const auto& dts = cfg.verify.filtering_dts;
  if (dts.size() < 2) throw ValidationError("verify.filtering_dts", "needs at least 2 dt values");

  VerifyReport rep;
  rep.suite = "filtering";
  Series ser{"filtering", {"dt", "rms", "mean", "standard_error"}, {}};
  std::vector<double> logdt, logrms;
  for (double dt : dts) {
    const std::size_t n = steps_for(cfg.sim.t_final, dt);
    std::vector<ResidualReport> reps(cfg.verify.filtering_seeds);
    parallel_for(reps.size(), threads, [&](std::size_t s) {
      TrajectoryOptions opt;
      opt.dt = dt;
      opt.n_steps = n;
      opt.scheme = cfg.sim.scheme;
      opt.record_stride = 1;
      const auto traj = run_trajectory(model, initial, opt, cfg.ensemble.master_seed, s);
      reps[s] = filtering_residual(traj, Z);
    });
    double ss = 0.0, sum = 0.0;
    std::size_t count = 0;
    for (const auto& r : reps)
      for (double x : r.residuals) {
        ss += x * x;
        sum += x;
        ++count;
      }
    const double N = static_cast<double>(count);
    const double rms = std::sqrt(ss / N);
    const double mean = sum / N;
    const double var = count > 1 ? (ss - N * mean * mean) / (N - 1.0) : 0.0;
    const double se = std::sqrt(std::max(var, 0.0) / N);
    ser.rows.push_back({dt, rms, mean, se});
    logdt.push_back(std::log(dt));
    logrms.push_back(std::log(rms));
    rep.add("rms_over_dt_pow_1.5[dt=" + fmt_dt(dt) + "]", rms / std::pow(dt, 1.5), {0.0, kFilteringConstant});
    rep.add("mean_residual_in_standard_errors[dt=" + fmt_dt(dt) + "]", se > 0.0 ? std::abs(mean) / se : 0.0,
            {0.0, kSigmas});
  }
  const double slope = fit_slope(logdt, logrms);
  rep.checks.insert(rep.checks.begin(),
                    Check{"rms_residual_slope", slope, kFilteringBand, std::isfinite(slope) && kFilteringBand.contains(slope)});
  rep.series.push_back(std::move(ser));
  return rep;
}

VerifyReport run_suite(const std::string& name, const RunConfig& cfg, std::size_t threads) {
  if (name == "equivalence") return verify_equivalence(cfg, threads);
  if (name == "gauge") return verify_gauge(cfg, threads);
  if (name == "ensemble") return verify_ensemble(cfg, threads);
  if (name == "born") return verify_born(cfg, threads);
  if (name == "order") return verify_order(cfg, threads);
  if (name == "filtering") return verify_filtering(cfg, threads);
  std::string known;
  for (const auto& s : suite_names()) known += (known.empty() ? "" : ", ") + s;
  throw ValidationError("--suite", "unknown suite '" + name + "' (" + known + ")");
}

}  // namespace qfilter
