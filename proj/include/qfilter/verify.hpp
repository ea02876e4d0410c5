#pragma once

#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "qfilter/config.hpp"

namespace qfilter {

struct Bound {
  double min = -std::numeric_limits<double>::infinity();
  double max = std::numeric_limits<double>::infinity();
  bool contains(double v) const { return v >= min && v <= max; }
};

struct Check {
  std::string name;
  double measured = 0.0;
  Bound bound;
  bool pass = false;
};

// Tabular data produced by a suite, written as <name>.csv next to the report.
struct Series {
  std::string name;
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

struct VerifyReport {
  std::string suite;
  std::vector<Check> checks;
  std::vector<Series> series;

  void add(std::string name, double measured, Bound bound);
  bool passed() const;
  nlohmann::json to_json() const;
};

const std::vector<std::string>& suite_names();

// Three schemes on common noise at dt and dt/2: pairwise trace distance, its
// shrink factor under halving, and the amplitude identity.
VerifyReport verify_equivalence(const RunConfig& cfg, std::size_t threads);
// Linear vs gauge-transformed solution on common noise.
VerifyReport verify_gauge(const RunConfig& cfg, std::size_t threads);
// Mean projector of the ensemble vs the master equation.
VerifyReport verify_ensemble(const RunConfig& cfg, std::size_t threads);
// Collapse frequencies vs Born weights and the martingale property of <L>.
VerifyReport verify_born(const RunConfig& cfg, std::size_t threads);
// Strong order of the nonlinear and linear schemes.
VerifyReport verify_order(const RunConfig& cfg, std::size_t threads);
// Per-step residual of the filtering equation across dt.
VerifyReport verify_filtering(const RunConfig& cfg, std::size_t threads);

VerifyReport run_suite(const std::string& name, const RunConfig& cfg, std::size_t threads);

}  // namespace qfilter
