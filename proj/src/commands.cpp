#include "qfilter/commands.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iostream>
#include <map>

#include "qfilter/config.hpp"
#include "qfilter/io.hpp"
#include "qfilter/parallel.hpp"
#include "qfilter/verify.hpp"

namespace qfilter {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string indexed(const char* stem, std::size_t i, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%06zu%s", stem, i, ext);
  return buf;
}

json basis_metadata(const ModelSpec& model) {
  if (!model.is_grid()) return {{"kind", "finite"}, {"dim", model.dim()}};
  const Grid& g = model.basis.grid_spec();
  return {{"kind", "grid1d"},  {"dim", model.dim()}, {"x_min", g.x_min},
          {"x_max", g.x_max},  {"n_points", g.n_points}, {"dx", g.dx()},
          {"weight", g.dx()}};
}

json manifest_header(const RunConfig& cfg, const std::string& command, const ModelSpec& model) {
  return {{"tool", "qfilter"},
          {"version", version_string()},
          {"command", command},
          {"config", cfg.resolved},
          {"basis", basis_metadata(model)},
          {"files", json::array()}};
}

bool has_format(const RunConfig& cfg, const char* f) {
  return std::find(cfg.output.formats.begin(), cfg.output.formats.end(), f) != cfg.output.formats.end();
}

void write_le_double(std::ofstream& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

struct WrittenFile {
  fs::path path;
  std::string kind;
};

struct TrajectoryOutput {
  std::vector<WrittenFile> files;
  std::vector<std::string> warnings;
};

// Writes every artifact of one trajectory. Each file has exactly one writer.
TrajectoryOutput write_trajectory(const fs::path& dir, std::size_t idx, const TrajectoryResult& r,
                                  const RunConfig& cfg) {
  TrajectoryOutput out;
  out.warnings = r.warnings;
  const std::size_t c = r.model->n_channels();
  const bool raw = r.scheme != Scheme::nonlinear;

  std::vector<std::string> header{"t"};
  for (const auto& [name, series] : r.expectations) header.push_back(name);
  header.push_back("ln_c");
  if (raw) header.push_back("ln_norm");
  header.push_back("norm_pre");
  for (std::size_t j = 0; j < c; ++j) header.push_back("dY_" + std::to_string(j + 1));

  const fs::path series_path = dir / indexed("traj", idx, ".csv");
  CsvWriter w(series_path, header);
  std::vector<double> row;
  std::size_t prev = 0;
  for (std::size_t s = 0; s < r.stored_steps.size(); ++s) {
    const std::size_t k = r.stored_steps[s];
    row.clear();
    row.push_back(r.times[s]);
    for (const auto& [name, series] : r.expectations) row.push_back(series[s]);
    row.push_back(r.log_amplitude[k]);
    if (raw) row.push_back(r.log_norm[k]);
    row.push_back(r.norm_pre[k]);
    for (std::size_t j = 0; j < c; ++j) {
      double sum = 0.0;
      for (std::size_t m = prev; m < k; ++m) sum += r.record.dY(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(j));
      row.push_back(sum);
    }
    prev = k;
    w.row(row);
  }
  w.close();
  out.files.push_back({series_path, "series"});

  const std::size_t dim = r.model->dim();
  std::vector<std::string> sh{"t"};
  for (std::size_t i = 0; i < dim; ++i) {
    sh.push_back("re_" + std::to_string(i));
    sh.push_back("im_" + std::to_string(i));
  }
  const fs::path states_path = dir / indexed("states", idx, ".csv");
  CsvWriter sw(states_path, sh);
  for (std::size_t s = 0; s < r.states.size(); ++s) {
    row.clear();
    row.push_back(r.times[s]);
    const CVector& v = r.states[s].amplitudes();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      row.push_back(v[i].real());
      row.push_back(v[i].imag());
    }
    sw.row(row);
  }
  sw.close();
  out.files.push_back({states_path, "states"});

  if (has_format(cfg, "binary")) {
    const fs::path bin_path = dir / indexed("states", idx, ".bin");
    std::ofstream bin(bin_path, std::ios::binary | std::ios::trunc);
    if (!bin) throw ValidationError("--out", "cannot write '" + bin_path.string() + "'");
    for (std::size_t s = 0; s < r.states.size(); ++s) {
      write_le_double(bin, r.times[s]);
      const CVector& v = r.states[s].amplitudes();
      for (Eigen::Index i = 0; i < v.size(); ++i) {
        write_le_double(bin, v[i].real());
        write_le_double(bin, v[i].imag());
      }
    }
    bin.close();
    out.files.push_back({bin_path, "states_binary"});
  }

  if (has_format(cfg, "record")) {
    std::vector<std::string> rh{"t"};
    for (std::size_t j = 0; j < c; ++j) rh.push_back("dY_" + std::to_string(j + 1));
    for (std::size_t j = 0; j < c; ++j) rh.push_back("Y_" + std::to_string(j + 1));
    const fs::path rec_path = dir / indexed("record", idx, ".csv");
    CsvWriter rw(rec_path, rh);
    for (std::size_t k = 0; k < r.n_steps; ++k) {
      row.clear();
      row.push_back(static_cast<double>(k) * r.dt);
      for (std::size_t j = 0; j < c; ++j) row.push_back(r.record.dY(Eigen::Index(k), Eigen::Index(j)));
      for (std::size_t j = 0; j < c; ++j) row.push_back(r.record.Y(Eigen::Index(k + 1), Eigen::Index(j)));
      rw.row(row);
    }
    rw.close();
    out.files.push_back({rec_path, "record"});
  }
  return out;
}

}  // namespace

ExitCode cmd_simulate(const SimulateArgs& args) {
  std::vector<std::string> overrides = args.overrides;
  if (args.seed) overrides.push_back("ensemble.master_seed=" + std::to_string(*args.seed));
  if (args.trajectories) overrides.push_back("ensemble.n_trajectories=" + std::to_string(*args.trajectories));
  const RunConfig cfg = parse_config(args.config, overrides);
  const fs::path dir = args.out.empty() ? fs::path(cfg.output.directory) : args.out;
  ensure_output_dir(dir);

  auto model = make_model(cfg);
  const StateVector initial = make_initial_state(cfg, *model);
  TrajectoryOptions opt;
  opt.dt = cfg.sim.dt;
  opt.n_steps = cfg.n_steps();
  opt.scheme = cfg.sim.scheme;
  opt.record_stride = cfg.sim.record_stride;
  opt.observables = make_observables(cfg, *model);

  const std::size_t n = cfg.ensemble.n_trajectories;
  std::vector<TrajectoryOutput> outputs(n);
  parallel_for(n, resolve_threads(args.threads), [&](std::size_t i) {
    const auto r = run_trajectory(model, initial, opt, cfg.ensemble.master_seed, i);
    outputs[i] = write_trajectory(dir, i, r, cfg);
  });

  Manifest m;
  m.document = manifest_header(cfg, "simulate", *model);
  m.document["scheme"] = std::string(to_string(cfg.sim.scheme));
  m.document["dt"] = cfg.sim.dt;
  m.document["n_steps"] = opt.n_steps;
  json seeds = json::array();
  for (std::size_t i = 0; i < n; ++i) {
    seeds.push_back({{"trajectory_index", i}, {"master_seed", cfg.ensemble.master_seed}});
    for (const auto& f : outputs[i].files) m.add_file(dir, f.path, f.kind);
    for (const auto& wmsg : outputs[i].warnings) {
      m.document["warnings"].push_back({{"trajectory_index", i}, {"message", wmsg}});
      std::cerr << "warning: trajectory " << i << ": " << wmsg << '\n';
    }
  }
  m.document["seeds"] = seeds;
  m.write(dir);
  return ExitCode::ok;
}

ExitCode cmd_master(const fs::path& config, const fs::path& out, const std::vector<std::string>& overrides) {
  const RunConfig cfg = parse_config(config, overrides);
  const fs::path dir = out.empty() ? fs::path(cfg.output.directory) : out;
  ensure_output_dir(dir);
  auto model = make_model(cfg);
  const StateVector initial = make_initial_state(cfg, *model);
  const auto traj = solve_master(*model, projector(initial), cfg.sim.dt, cfg.n_steps(), cfg.sim.record_stride);

  const std::size_t dim = model->dim();
  std::vector<std::string> header{"t"};
  for (std::size_t i = 0; i < dim; ++i)
    for (std::size_t j = 0; j < dim; ++j) {
      const std::string ij = std::to_string(i) + "_" + std::to_string(j);
      header.push_back("re_" + ij);
      header.push_back("im_" + ij);
    }
  header.push_back("trace");
  const fs::path path = dir / "master.csv";
  CsvWriter w(path, header);
  std::vector<double> row;
  for (std::size_t s = 0; s < traj.times.size(); ++s) {
    const CMatrix& rho = traj.states[s].entries();
    row.assign(1, traj.times[s]);
    for (std::size_t i = 0; i < dim; ++i)
      for (std::size_t j = 0; j < dim; ++j) {
        row.push_back(rho(Eigen::Index(i), Eigen::Index(j)).real());
        row.push_back(rho(Eigen::Index(i), Eigen::Index(j)).imag());
      }
    row.push_back(traj.states[s].trace().real());
    w.row(row);
  }
  w.close();

  Manifest m;
  m.document = manifest_header(cfg, "master", *model);
  m.document["dt"] = cfg.sim.dt;
  m.add_file(dir, path, "density");
  m.write(dir);
  return ExitCode::ok;
}

ExitCode cmd_verify(const std::string& suite, const fs::path& config, const fs::path& out,
                    const std::vector<std::string>& overrides, std::size_t threads) {
  const auto& names = suite_names();
  if (std::find(names.begin(), names.end(), suite) == names.end()) {
    std::string known;
    for (const auto& s : names) known += (known.empty() ? "" : ", ") + s;
    throw ValidationError("--suite", "unknown suite '" + suite + "' (" + known + ")");
  }
  const RunConfig cfg = parse_config(config, overrides);
  const fs::path dir = out.empty() ? fs::path(cfg.output.directory) : out;
  ensure_output_dir(dir);
  const VerifyReport rep = run_suite(suite, cfg, resolve_threads(threads));

  Manifest m;
  m.document = manifest_header(cfg, "verify", *make_model(cfg));
  m.document["suite"] = suite;
  for (const auto& s : rep.series) {
    const fs::path p = dir / (s.name + ".csv");
    CsvWriter w(p, s.header);
    for (const auto& r : s.rows) w.row(r);
    w.close();
    m.add_file(dir, p, "series");
  }
  const fs::path report_path = dir / "report.json";
  {
    std::ofstream f(report_path, std::ios::binary | std::ios::trunc);
    if (!f) throw ValidationError("--out", "cannot write '" + report_path.string() + "'");
    f << rep.to_json().dump(2) << '\n';
  }
  m.add_file(dir, report_path, "report");
  m.write(dir);

  for (const auto& c : rep.checks) {
    std::cout << (c.pass ? "PASS " : "FAIL ") << rep.suite << '.' << c.name << " measured=" << format_double(c.measured)
              << " bound=[" << format_double(c.bound.min) << ", " << format_double(c.bound.max) << "]\n";
  }
  return rep.passed() ? ExitCode::ok : ExitCode::verification;
}

ExitCode cmd_export_plot(const fs::path& run_dir, const std::string& what, const fs::path& out) {
  const Manifest m = Manifest::read(run_dir);
  m.verify_files(run_dir);
  if (m.document.value("command", "") != "simulate")
    throw ValidationError("--in", "export-plot needs the output directory of a simulate run");

  std::vector<fs::path> series_files, state_files;
  for (const auto& f : m.document.at("files")) {
    const std::string kind = f.at("kind").get<std::string>();
    if (kind == "series") series_files.push_back(run_dir / f.at("path").get<std::string>());
    if (kind == "states") state_files.push_back(run_dir / f.at("path").get<std::string>());
  }
  if (series_files.empty()) throw ValidationError("--in", "run contains no trajectory series");

  std::vector<CsvTable> tables;
  std::vector<std::string> header{"t"};
  std::vector<std::vector<double>> columns;  // one per output column after t
  auto traj_name = [](std::size_t i) { return "traj" + std::to_string(i); };
  bool with_mean = false;

  if (what.rfind("expectation:", 0) == 0) {
    const std::string name = what.substr(std::string("expectation:").size());
    for (std::size_t i = 0; i < series_files.size(); ++i) {
      tables.push_back(read_csv(series_files[i]));
      const auto& t = tables.back();
      const auto it = std::find(t.header.begin(), t.header.end(), name);
      if (name.empty() || it == t.header.end() || name == "t")
        throw ValidationError("--what", "no stored expectation named '" + name + "'");
      const std::size_t col = static_cast<std::size_t>(it - t.header.begin());
      header.push_back(traj_name(i));
      columns.emplace_back();
      for (const auto& r : t.rows) columns.back().push_back(r[col]);
    }
    with_mean = true;
  } else if (what == "variance") {
    const json& basis = m.document.at("basis");
    if (basis.at("kind") != "grid1d") throw ValidationError("--what", "variance export requires a grid run");
    const Grid g{basis.at("x_min").get<double>(), basis.at("x_max").get<double>(),
                 basis.at("n_points").get<std::size_t>()};
    for (std::size_t i = 0; i < state_files.size(); ++i) {
      tables.push_back(read_csv(state_files[i]));
      header.push_back(traj_name(i));
      columns.emplace_back();
      for (const auto& r : tables.back().rows) {
        double w = 0.0, mx = 0.0, mx2 = 0.0;
        for (std::size_t k = 0; k < g.n_points; ++k) {
          const double p = r[1 + 2 * k] * r[1 + 2 * k] + r[2 + 2 * k] * r[2 + 2 * k];
          const double x = g.x(k);
          w += p;
          mx += p * x;
          mx2 += p * x * x;
        }
        mx /= w;
        columns.back().push_back(mx2 / w - mx * mx);
      }
    }
    with_mean = true;
  } else if (what == "record") {
    for (std::size_t i = 0; i < series_files.size(); ++i) {
      tables.push_back(read_csv(series_files[i]));
      const auto& t = tables.back();
      for (std::size_t col = 0; col < t.header.size(); ++col) {
        if (t.header[col].rfind("dY_", 0) != 0) continue;
        header.push_back(traj_name(i) + "_Y_" + t.header[col].substr(3));
        columns.emplace_back();
        double y = 0.0;
        for (const auto& r : t.rows) columns.back().push_back(y += r[col]);
      }
    }
  } else if (what == "norm") {
    const double weight = m.document.at("basis").value("weight", 1.0);
    for (std::size_t i = 0; i < series_files.size(); ++i) {
      tables.push_back(read_csv(series_files[i]));
      const CsvTable st = read_csv(state_files.at(i));
      const std::size_t lc = tables.back().column("ln_c");
      header.push_back(traj_name(i) + "_norm");
      columns.emplace_back();
      for (const auto& r : st.rows) {
        double s = 0.0;
        for (std::size_t k = 1; k < r.size(); ++k) s += r[k] * r[k];
        columns.back().push_back(std::sqrt(weight * s));
      }
      header.push_back(traj_name(i) + "_ln_c");
      columns.emplace_back();
      for (const auto& r : tables.back().rows) columns.back().push_back(r[lc]);
    }
  } else {
    throw ValidationError("--what", "expected expectation:NAME, variance, record or norm; got '" + what + "'");
  }

  const auto& times = tables.front();
  const std::size_t n_rows = times.rows.size();
  for (const auto& c : columns)
    if (c.size() != n_rows) throw ValidationError("--in", "trajectories have different numbers of stored rows");
  if (with_mean) header.push_back("mean");

  if (out.has_parent_path()) ensure_output_dir(out.parent_path());
  CsvWriter w(out, header);
  std::vector<double> row;
  for (std::size_t k = 0; k < n_rows; ++k) {
    row.assign(1, times.rows[k][0]);
    double sum = 0.0;
    for (const auto& c : columns) {
      row.push_back(c[k]);
      sum += c[k];
    }
    if (with_mean) row.push_back(sum / static_cast<double>(columns.size()));
    w.row(row);
  }
  w.close();
  return ExitCode::ok;
}

}  // namespace qfilter
