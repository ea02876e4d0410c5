#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "qfilter/errors.hpp"

namespace qfilter {

struct SimulateArgs {
  std::filesystem::path config;
  std::filesystem::path out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> trajectories;
  std::vector<std::string> overrides;
  std::size_t threads = 0;  // 0 = all available, still capped by QFILTER_THREADS
};

// Each command returns its exit code; errors propagate as qfilter::Error.
ExitCode cmd_simulate(const SimulateArgs& args);
ExitCode cmd_master(const std::filesystem::path& config, const std::filesystem::path& out,
                    const std::vector<std::string>& overrides = {});
ExitCode cmd_verify(const std::string& suite, const std::filesystem::path& config, const std::filesystem::path& out,
                    const std::vector<std::string>& overrides = {}, std::size_t threads = 0);
// what: expectation:NAME | variance | record | norm
ExitCode cmd_export_plot(const std::filesystem::path& run_dir, const std::string& what,
                         const std::filesystem::path& out);

}  // namespace qfilter
