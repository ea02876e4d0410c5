#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

namespace qfilter {

// Shortest round-trip decimal form, independent of the global locale.
std::string format_double(double v);

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);
  void row(const std::vector<double>& values);
  void close();
  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  std::size_t columns_;
  std::string line_;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::size_t column(const std::string& name) const;  // throws ValidationError if absent
};

CsvTable read_csv(const std::filesystem::path& path);

// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

// Run inventory written next to the outputs. Paths are relative to the run directory.
struct Manifest {
  nlohmann::json document;

  void add_file(const std::filesystem::path& run_dir, const std::filesystem::path& file, const std::string& kind);
  void write(const std::filesystem::path& run_dir) const;

  static Manifest read(const std::filesystem::path& run_dir);
  // Recomputes every listed checksum; throws ValidationError naming the first mismatch.
  void verify_files(const std::filesystem::path& run_dir) const;
};

inline constexpr const char* kManifestName = "manifest.json";

std::string version_string();

// Creates the directory (and parents); throws ValidationError if it cannot be written.
void ensure_output_dir(const std::filesystem::path& dir);

}  // namespace qfilter
