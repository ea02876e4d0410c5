// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "qfilter/analysis.hpp"
#include "qfilter/commands.hpp"
#include "qfilter/config.hpp"
#include "qfilter/io.hpp"
#include "qfilter/verify.hpp"

using namespace qfilter;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

fs::path config_path(const char* name) { return fs::path(QFILTER_SOURCE_DIR) / "configs" / name; }

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

// Selects checks from a suite report by name prefix.
Outcome from_report(const VerifyReport& rep, const std::vector<std::string>& prefixes) {
  Outcome o{true, {}};
  std::ostringstream s;
  for (const auto& c : rep.checks) {
    bool wanted = false;
    for (const auto& p : prefixes) wanted = wanted || c.name.rfind(p, 0) == 0;
    if (!wanted) continue;
    o.pass = o.pass && c.pass;
    s << " " << c.name << "=" << fmt(c.measured) << " [" << fmt(c.bound.min) << ", " << fmt(c.bound.max) << "]";
  }
  o.detail = s.str();
  return o;
}

Outcome unitary_limit() {
  auto model = std::make_shared<const ModelSpec>(build_qubit_model({1.0, 0.0, 0.0}, 0.0));
  const auto psi0 = StateVector::basis_state(model->basis, 0);
  TrajectoryOptions o;
  o.dt = 1e-4;
  o.n_steps = 10000;
  o.record_stride = 1000;
  const auto r = run_trajectory(model, psi0, o, 1, 0);
  const auto exact = matrix_exp(model->hamiltonian, Complex(0.0, -1.0)).apply(psi0);
  double worst = 1.0;
  for (std::size_t k = 0; k < r.states.size(); ++k) {
    const auto ex = matrix_exp(model->hamiltonian, Complex(0.0, -r.times[k])).apply(psi0);
    worst = std::min(worst, std::norm(inner(r.states[k], ex)));
  }
  worst = std::min(worst, std::norm(inner(r.final_state(), exact)));
  return {worst >= 1.0 - 1e-4, " min_fidelity=" + fmt(worst) + " [0.9999, 1]"};
}

Outcome dephasing_oracle() {
  const auto cfg = parse_config(config_path("dephasing.json"));
  const auto model = make_model(cfg);
  const auto rho0 = projector(make_initial_state(cfg, *model));
  const auto traj = solve_master(*model, rho0, cfg.sim.dt, cfg.n_steps());
  const double t = traj.times.back();
  const double err = std::abs(traj.states.back().entries()(0, 1) - 0.5 * std::exp(-4.0 * t));
  return {t == 0.5 && err <= 1e-6, " t=" + fmt(t) + " abs_error=" + fmt(err) + " [0, 1e-06]"};
}

Outcome grid_localization() {
  const auto cfg = parse_config(config_path("grid_free.json"), {"sim.record_stride=100"});
  const auto measured = make_model(cfg);
  auto free_cfg = parse_config(config_path("grid_free.json"), {"sim.record_stride=100", "constants.lambda=0"});
  const auto unmeasured = make_model(free_cfg);
  const auto psi0 = make_initial_state(cfg, *measured);
  TrajectoryOptions o;
  o.dt = cfg.sim.dt;
  o.n_steps = cfg.n_steps();
  o.record_stride = cfg.sim.record_stride;

  const auto free_run = run_trajectory(unmeasured, psi0, o, cfg.ensemble.master_seed, 0);
  const auto free_loc = localization_metrics(free_run);
  double worst_rel = 0.0, var_free_15 = 0.0;
  for (std::size_t k = 0; k < free_loc.times.size(); ++k) {
    const double t = free_loc.times[k];
    const double expected = 1.0 + (t / 2.0) * (t / 2.0);
    worst_rel = std::max(worst_rel, std::abs(free_loc.var_x[k] - expected) / expected);
    if (std::abs(t - 1.5) < 1e-9) var_free_15 = free_loc.var_x[k];
  }

  const auto run = run_trajectory(measured, psi0, o, cfg.ensemble.master_seed, 0);
  const auto loc = localization_metrics(run);
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t k = 0; k < loc.times.size(); ++k) {
    if (loc.times[k] >= 1.0 - 1e-9 && loc.times[k] <= 2.0 + 1e-9) {
      sum += loc.var_x[k];
      ++n;
    }
  }
  const double avg = sum / static_cast<double>(n);
  double norm_dev = 0.0;
  for (const auto& s : run.states) norm_dev = std::max(norm_dev, std::abs(s.norm() - 1.0));

  const bool pass = worst_rel <= 0.02 && avg < var_free_15 && norm_dev <= 1e-9;
  return {pass, " free_var_rel_error=" + fmt(worst_rel) + " [0, 0.02] measured_avg_var=" + fmt(avg) +
                    " < free_var(1.5)=" + fmt(var_free_15) + " norm_deviation=" + fmt(norm_dev) + " [0, 1e-09]"};
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "qfilter_acceptance_determinism";
  fs::remove_all(root);
  std::vector<nlohmann::json> lists;
  for (auto [name, threads] : {std::pair{"w1a", 1}, std::pair{"w1b", 1}, std::pair{"w8", 8}}) {
    SimulateArgs a{config_path("qubit.json"), root / name};
    a.threads = static_cast<std::size_t>(threads);
    cmd_simulate(a);
    lists.push_back(Manifest::read(root / name).document.at("files"));
  }
  const bool pass = !lists[0].empty() && lists[0] == lists[1] && lists[0] == lists[2];
  const std::size_t n_files = lists[0].size();
  fs::remove_all(root);
  return {pass, " files=" + std::to_string(n_files) + " checksums identical across 1, 1, 8 workers: " +
                    (pass ? "yes" : "no")};
}

}  // namespace

int main() {
  const std::size_t threads = 0;
  RunConfig equivalence_cfg;
  VerifyReport equivalence;
  bool equivalence_ready = false;
  auto equivalence_report = [&]() -> const VerifyReport& {
    if (!equivalence_ready) {
      equivalence_cfg = parse_config(config_path("equivalence.json"));
      equivalence = verify_equivalence(equivalence_cfg, threads);
      equivalence_ready = true;
    }
    return equivalence;
  };

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"unitary limit", unitary_limit},
      {"pathwise three-way equivalence",
       [&] { return from_report(equivalence_report(), {"max_pairwise_trace_distance", "shrink_factor_half_dt"}); }},
      {"amplitude identity", [&] { return from_report(equivalence_report(), {"amplitude_relative_deviation"}); }},
      {"ensemble vs master",
       [&] {
         return from_report(verify_ensemble(parse_config(config_path("qubit.json")), threads),
                            {"max_mean_projector_trace_distance"});
       }},
      {"master dephasing oracle", dephasing_oracle},
      {"Born-rule collapse",
       [&] { return from_report(verify_born(parse_config(config_path("born.json")), threads), {""}); }},
      {"filtering residual scaling",
       [&] {
         return from_report(verify_filtering(parse_config(config_path("qubit.json")), threads), {"rms_residual_slope"});
       }},
      {"strong order",
       [&] { return from_report(verify_order(parse_config(config_path("qubit.json")), threads), {"strong_order_slope"}); }},
      {"grid localization", grid_localization},
      {"determinism", determinism},
  };

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string(" error: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("%s criterion %zu (%s):%s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
