#include <iostream>

#include <CLI11.hpp>

#include "qfilter/commands.hpp"
#include "qfilter/io.hpp"

namespace {

int report(const qfilter::Error& e) {
  std::cerr << "error: " << e.what() << '\n';
  return static_cast<int>(e.exit_code());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Continuous-measurement quantum trajectory simulator"};
  app.set_version_flag("--version", qfilter::version_string());
  app.require_subcommand(1);

  qfilter::SimulateArgs sim;
  std::uint64_t seed = 0;
  std::size_t trajectories = 0;
  auto* simulate = app.add_subcommand("simulate", "Run an ensemble of trajectories");
  simulate->add_option("--config", sim.config, "JSON run configuration")->required()->check(CLI::ExistingFile);
  auto* seed_opt = simulate->add_option("--seed", seed, "Master seed (overrides ensemble.master_seed)");
  auto* traj_opt = simulate->add_option("--trajectories", trajectories, "Ensemble size")->check(CLI::PositiveNumber);
  simulate->add_option("--set", sim.overrides, "Dotted-path override, e.g. sim.dt=1e-4");
  simulate->add_option("--threads", sim.threads, "Worker count (0 = all cores; QFILTER_THREADS caps it)");
  simulate->add_option("--out", sim.out, "Output directory")->required();

  std::filesystem::path config, out, in;
  std::vector<std::string> overrides;
  std::size_t threads = 0;
  auto* master = app.add_subcommand("master", "Integrate the master equation");
  master->add_option("--config", config)->required()->check(CLI::ExistingFile);
  master->add_option("--set", overrides);
  master->add_option("--out", out)->required();

  std::string suite;
  auto* verify = app.add_subcommand("verify", "Run a verification suite");
  verify->add_option("--suite", suite, "equivalence | ensemble | born | order | filtering | gauge")->required();
  verify->add_option("--config", config)->required()->check(CLI::ExistingFile);
  verify->add_option("--set", overrides);
  verify->add_option("--threads", threads);
  verify->add_option("--out", out)->required();

  std::string what;
  auto* plot = app.add_subcommand("export-plot", "Flatten stored series of a run into one CSV");
  plot->add_option("--in", in, "Run directory")->required()->check(CLI::ExistingDirectory);
  plot->add_option("--what", what, "expectation:NAME | variance | record | norm")->required();
  plot->add_option("--out", out, "Output CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(qfilter::ExitCode::validation);
  }

  try {
    qfilter::ExitCode rc = qfilter::ExitCode::ok;
    if (*simulate) {
      if (*seed_opt) sim.seed = seed;
      if (*traj_opt) sim.trajectories = trajectories;
      rc = qfilter::cmd_simulate(sim);
    } else if (*master) {
      rc = qfilter::cmd_master(config, out, overrides);
    } else if (*verify) {
      rc = qfilter::cmd_verify(suite, config, out, overrides, threads);
    } else if (*plot) {
      rc = qfilter::cmd_export_plot(in, what, out);
    }
    return static_cast<int>(rc);
  } catch (const qfilter::Error& e) {
    return report(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(qfilter::ExitCode::failure);
  }
}
