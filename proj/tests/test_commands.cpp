#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "helpers.hpp"
#include "qfilter/analysis.hpp"
#include "qfilter/commands.hpp"
#include "qfilter/config.hpp"
#include "qfilter/io.hpp"

using namespace qfilter;
namespace fs = std::filesystem;

namespace {

fs::path write_config(const fs::path& dir, const std::string& name, const std::string& text) {
  const fs::path p = dir / name;
  std::ofstream(p) << text;
  return p;
}

const char* kQubit = R"({"model": {"kind": "qubit", "qubit": {"h_field": [1, 0, 0]}},
  "constants": {"lambda": 1}, "initial": {"amplitudes": [1, 0]},
  "sim": {"dt": 0.001, "t_final": 0.2, "record_stride": 20},
  "ensemble": {"n_trajectories": 6, "master_seed": 4}, "output": {"formats": ["csv", "record", "binary"]}})";

const char* kGrid = R"({"model": {"kind": "grid1d", "grid": {"x_min": -20, "x_max": 20, "n_points": 256}},
  "constants": {"lambda": 0.5}, "initial": {"gaussian": {"x0": 0.5, "sigma": 1}},
  "sim": {"dt": 1e-4, "t_final": 0.05, "record_stride": 100},
  "ensemble": {"n_trajectories": 2, "master_seed": 8}})";

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Manifest file list without the command-specific header fields.
nlohmann::json file_list(const fs::path& dir) { return Manifest::read(dir).document.at("files"); }

#ifdef QFILTER_CLI_PATH
int run_cli(const std::string& args) {
  const std::string cmd = std::string(QFILTER_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}
#endif

}  // namespace

TEST_SUITE("commands") {
  TEST_CASE("simulate is deterministic across repeats and thread counts") {
    const auto dir = testing::scratch_dir("sim_det");
    const auto cfg = write_config(dir, "q.json", kQubit);
    SimulateArgs a{cfg, dir / "a"};
    a.threads = 1;
    CHECK(cmd_simulate(a) == ExitCode::ok);
    SimulateArgs b{cfg, dir / "b"};
    b.threads = 4;
    CHECK(cmd_simulate(b) == ExitCode::ok);
    SimulateArgs c{cfg, dir / "c"};
    c.threads = 1;
    CHECK(cmd_simulate(c) == ExitCode::ok);
    CHECK(file_list(dir / "a") == file_list(dir / "b"));
    CHECK(file_list(dir / "a") == file_list(dir / "c"));
    CHECK(slurp(dir / "a" / kManifestName) == slurp(dir / "b" / kManifestName));
    CHECK(file_list(dir / "a").size() == 6 * 4);

    SimulateArgs d{cfg, dir / "d"};
    d.seed = 5;
    CHECK(cmd_simulate(d) == ExitCode::ok);
    CHECK(file_list(dir / "a") != file_list(dir / "d"));
  }

  TEST_CASE("simulate output layout") {
    const auto dir = testing::scratch_dir("sim_layout");
    SimulateArgs a{write_config(dir, "q.json", kQubit), dir / "run"};
    a.trajectories = 2;
    a.overrides = {"sim.scheme=linear"};
    REQUIRE(cmd_simulate(a) == ExitCode::ok);
    const auto traj = read_csv(dir / "run" / "traj_000001.csv");
    CHECK(traj.rows.size() == 11);
    CHECK(traj.header.front() == "t");
    CHECK_NOTHROW(traj.column("sigma_z"));
    CHECK_NOTHROW(traj.column("ln_c"));
    CHECK_NOTHROW(traj.column("ln_norm"));
    CHECK_NOTHROW(traj.column("norm_pre"));
    const auto states = read_csv(dir / "run" / "states_000001.csv");
    CHECK(states.header.size() == 5);
    // t followed by re/im pairs, little-endian f64.
    CHECK(fs::file_size(dir / "run" / "states_000001.bin") == 11 * (1 + 2 * 2) * 8);
    const auto rec = read_csv(dir / "run" / "record_000000.csv");
    CHECK(rec.rows.size() == 200);
    const auto man = Manifest::read(dir / "run").document;
    CHECK(man.at("command") == "simulate");
    CHECK(man.at("scheme") == "linear");
    CHECK(man.at("config").at("ensemble").at("n_trajectories") == 2);
  }

  TEST_CASE("lambda = 0 trajectory reproduces unitary evolution") {
    const auto dir = testing::scratch_dir("sim_unitary");
    SimulateArgs a{write_config(dir, "q.json", kQubit), dir / "run"};
    a.overrides = {"constants.lambda=0", "sim.dt=1e-4", "sim.record_stride=2000"};
    a.trajectories = 1;
    REQUIRE(cmd_simulate(a) == ExitCode::ok);
    const auto states = read_csv(dir / "run" / "states_000000.csv");
    const auto& last = states.rows.back();
    CVector v(2);
    v << Complex(last[1], last[2]), Complex(last[3], last[4]);
    const auto m = build_qubit_model({1.0, 0.0, 0.0}, 0.0);
    const auto exact = solve_unitary(m, testing::qubit(1.0, 0.0), last[0]);
    CHECK(std::norm(inner(StateVector(m.basis, v), exact)) >= 1.0 - 1e-4);
  }

  TEST_CASE("master command: dephasing coherence and unit trace") {
    const auto dir = testing::scratch_dir("master");
    const auto cfg = write_config(dir, "d.json", R"({"model": {"kind": "qubit", "qubit": {"h_field": [0, 0, 0]}},
      "constants": {"lambda": 1}, "sim": {"dt": 0.001, "t_final": 0.5, "record_stride": 50}})");
    REQUIRE(cmd_master(cfg, dir / "run") == ExitCode::ok);
    const auto t = read_csv(dir / "run" / "master.csv");
    CHECK(t.rows.size() == 11);
    const auto re01 = t.column("re_0_1"), tr = t.column("trace");
    for (const auto& row : t.rows) {
      CHECK(std::abs(row[re01] - 0.5 * std::exp(-4.0 * row[0])) <= 1e-6);
      CHECK(std::abs(row[tr] - 1.0) <= 1e-10);
    }
  }

  TEST_CASE("master command: unitary limit") {
    const auto dir = testing::scratch_dir("master_unitary");
    const auto cfg = write_config(dir, "u.json", R"({"model": {"kind": "qubit", "qubit": {"h_field": [0, 0, 2]}},
      "constants": {"lambda": 0}, "sim": {"dt": 0.001, "t_final": 1, "record_stride": 1000}})");
    REQUIRE(cmd_master(cfg, dir / "run") == ExitCode::ok);
    const auto t = read_csv(dir / "run" / "master.csv");
    // H = sigma_z on (1,1)/sqrt2: rho_01 = exp(-2 i t) / 2.
    const auto& row = t.rows.back();
    CHECK(std::abs(row[t.column("re_0_1")] - 0.5 * std::cos(2.0)) <= 1e-9);
    CHECK(std::abs(row[t.column("im_0_1")] + 0.5 * std::sin(2.0)) <= 1e-9);
  }

  TEST_CASE("verify rejects unknown suites") {
    const auto dir = testing::scratch_dir("verify_bad");
    const auto cfg = write_config(dir, "q.json", kQubit);
    CHECK_THROWS_AS(cmd_verify("nonsense", cfg, dir / "run"), ValidationError);
    CHECK_THROWS_AS(cmd_verify("order", cfg, dir / "run", {"verify.dts=[0.01, 0.005, 0.0025]"}), ValidationError);
  }

  TEST_CASE("verify writes a report") {
    const auto dir = testing::scratch_dir("verify_gauge");
    const auto cfg = write_config(dir, "q.json", kQubit);
    CHECK(cmd_verify("gauge", cfg, dir / "run", {"verify.n_seeds=2"}) == ExitCode::ok);
    std::ifstream in(dir / "run" / "report.json");
    const auto rep = nlohmann::json::parse(in);
    CHECK(rep.at("suite") == "gauge");
    CHECK(rep.at("pass") == true);
    CHECK_NOTHROW(Manifest::read(dir / "run").verify_files(dir / "run"));
  }

  TEST_CASE("export-plot tables") {
    const auto dir = testing::scratch_dir("export");
    SimulateArgs a{write_config(dir, "q.json", kQubit), dir / "run"};
    REQUIRE(cmd_simulate(a) == ExitCode::ok);
    REQUIRE(cmd_export_plot(dir / "run", "expectation:sigma_z", dir / "sz.csv") == ExitCode::ok);
    const auto t = read_csv(dir / "sz.csv");
    CHECK(t.rows.size() == 11);
    CHECK(t.header.size() == 1 + 6 + 1);
    double mean = 0.0;
    for (std::size_t k = 1; k <= 6; ++k) mean += t.rows.back()[k];
    CHECK(t.rows.back()[t.column("mean")] == doctest::Approx(mean / 6.0).epsilon(1e-12));
    CHECK(cmd_export_plot(dir / "run", "record", dir / "rec.csv") == ExitCode::ok);
    CHECK(cmd_export_plot(dir / "run", "norm", dir / "norm.csv") == ExitCode::ok);
    const auto n = read_csv(dir / "norm.csv");
    for (const auto& row : n.rows) CHECK(std::abs(row[n.column("traj0_norm")] - 1.0) <= 1e-9);
    CHECK_THROWS_AS(cmd_export_plot(dir / "run", "expectation:nope", dir / "x.csv"), ValidationError);
    CHECK_THROWS_AS(cmd_export_plot(dir / "run", "variance", dir / "x.csv"), ValidationError);
    CHECK_THROWS_AS(cmd_export_plot(dir / "run", "colour", dir / "x.csv"), ValidationError);
    std::ofstream(dir / "run" / "traj_000002.csv", std::ios::app) << "0\n";
    CHECK_THROWS_AS(cmd_export_plot(dir / "run", "expectation:sigma_z", dir / "sz.csv"), ValidationError);
  }

  TEST_CASE("export-plot variance matches the localization metrics") {
    const auto dir = testing::scratch_dir("export_var");
    const auto cfg = write_config(dir, "g.json", kGrid);
    SimulateArgs a{cfg, dir / "run"};
    REQUIRE(cmd_simulate(a) == ExitCode::ok);
    REQUIRE(cmd_export_plot(dir / "run", "variance", dir / "var.csv") == ExitCode::ok);
    const auto t = read_csv(dir / "var.csv");

    const auto rc = parse_config(cfg);
    const auto m = make_model(rc);
    TrajectoryOptions o;
    o.dt = rc.sim.dt;
    o.n_steps = rc.n_steps();
    o.record_stride = rc.sim.record_stride;
    const auto loc = localization_metrics(run_trajectory(m, make_initial_state(rc, *m), o, 8, 1));
    REQUIRE(loc.var_x.size() == t.rows.size());
    for (std::size_t k = 0; k < t.rows.size(); ++k)
      CHECK(t.rows[k][t.column("traj1")] == doctest::Approx(loc.var_x[k]).epsilon(1e-12));
  }

#ifdef QFILTER_CLI_PATH
  TEST_CASE("CLI exit codes") {
    const auto dir = testing::scratch_dir("cli");
    const auto good = write_config(dir, "q.json", kQubit);
    const auto bad = write_config(dir, "bad.json", R"({"model": {"kind": "qubit"}, "constants": {"lambda": -1},
      "sim": {"dt": 0.001, "t_final": 1}})");
    const auto blow = write_config(dir, "blow.json", R"({"model": {"kind": "qubit", "qubit": {"h_field": [1, 0, 0]}},
      "constants": {"lambda": 1}, "sim": {"dt": 5, "t_final": 5000, "record_stride": 1}})");
    const auto d = dir.string();
    CHECK(run_cli("--version") == 0);
    CHECK(run_cli("") == 2);
    CHECK(run_cli("simulate --config " + good.string() + " --out " + d + "/ok --trajectories 1") == 0);
    CHECK(run_cli("simulate --config " + bad.string() + " --out " + d + "/bad") == 2);
    CHECK(run_cli("simulate --config " + good.string() + " --out " + d + "/x --set sim.dt=-1") == 2);
    CHECK(run_cli("simulate --config " + good.string()) == 2);
    CHECK(run_cli("master --config " + blow.string() + " --out " + d + "/blow") == 3);
    CHECK(run_cli("verify --suite nope --config " + good.string() + " --out " + d + "/v") == 2);
    CHECK(run_cli("verify --suite equivalence --config " + good.string() + " --out " + d + "/eq --set verify.n_seeds=1 "
                  "--set sim.dt=0.01 --set constants.lambda=3") == 4);
    CHECK(run_cli("export-plot --in " + d + "/ok --what expectation:sigma_z --out " + d + "/p.csv") == 0);
    CHECK(run_cli("export-plot --in " + d + "/ok --what bogus --out " + d + "/p.csv") == 2);
  }
#endif
}
