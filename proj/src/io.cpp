#include "qfilter/io.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdio>
#include <iomanip>
#include <memory>
#include <sstream>

#include "qfilter/errors.hpp"

#ifndef QFILTER_VERSION
#define QFILTER_VERSION "unknown"
#endif

namespace qfilter {

namespace fs = std::filesystem;

std::string format_double(double v) {
  std::array<char, 32> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::general, 17);
  if (ec != std::errc()) throw Error("format_double: conversion failed");
  return std::string(buf.data(), end);
}

CsvWriter::CsvWriter(const fs::path& path, const std::vector<std::string>& header)
    : path_(path), out_(path, std::ios::binary | std::ios::trunc), columns_(header.size()) {
  if (!out_) throw ValidationError("--out", "cannot write '" + path.string() + "'");
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i) out_ << ',';
    out_ << header[i];
  }
  out_ << '\n';
}

void CsvWriter::row(const std::vector<double>& values) {
  if (values.size() != columns_) throw DimensionError("CsvWriter::row: column count mismatch");
  line_.clear();
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) line_ += ',';
    line_ += format_double(values[i]);
  }
  line_ += '\n';
  out_ << line_;
}

void CsvWriter::close() {
  out_.close();
  if (out_.fail()) throw Error("failed writing '" + path_.string() + "'");
}

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  throw ValidationError("column", "no column named '" + name + "'");
}

CsvTable read_csv(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("--in", "cannot read '" + path.string() + "'");
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("--in", "'" + path.string() + "' is empty");
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) t.header.push_back(cell);
  }
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> row;
    row.reserve(t.header.size());
    const char* p = line.data();
    const char* end = line.data() + line.size();
    while (p <= end) {
      const char* comma = std::find(p, end, ',');
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(p, comma, v);
      if (ec != std::errc() || ptr != comma)
        throw ValidationError("--in", path.filename().string() + ":" + std::to_string(lineno) + ": bad number");
      row.push_back(v);
      p = comma + 1;
    }
    if (row.size() != t.header.size())
      throw ValidationError("--in", path.filename().string() + ":" + std::to_string(lineno) + ": wrong column count");
    t.rows.push_back(std::move(row));
  }
  return t;
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("file", "cannot read '" + path.string() + "'");
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw Error("sha256: init failed");
  std::array<char, 1 << 16> buf;
  while (in) {
    in.read(buf.data(), buf.size());
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md.data(), &len);
  std::string hex;
  static const char* digits = "0123456789abcdef";
  for (unsigned int i = 0; i < len; ++i) {
    hex += digits[md[i] >> 4];
    hex += digits[md[i] & 0xf];
  }
  return hex;
}

void Manifest::add_file(const fs::path& run_dir, const fs::path& file, const std::string& kind) {
  const fs::path rel = fs::relative(file, run_dir);
  document["files"].push_back(
      {{"path", rel.generic_string()}, {"kind", kind}, {"bytes", fs::file_size(file)}, {"sha256", sha256_file(file)}});
}

void Manifest::write(const fs::path& run_dir) const {
  std::ofstream out(run_dir / kManifestName, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("--out", "cannot write manifest in '" + run_dir.string() + "'");
  out << document.dump(2) << '\n';
}

Manifest Manifest::read(const fs::path& run_dir) {
  std::ifstream in(run_dir / kManifestName);
  if (!in) throw ValidationError("--in", "no " + std::string(kManifestName) + " in '" + run_dir.string() + "'");
  Manifest m;
  m.document = nlohmann::json::parse(in, nullptr, false);
  if (m.document.is_discarded() || !m.document.contains("files"))
    throw ValidationError("--in", "malformed manifest in '" + run_dir.string() + "'");
  return m;
}

void Manifest::verify_files(const fs::path& run_dir) const {
  for (const auto& f : document.at("files")) {
    const fs::path p = run_dir / f.at("path").get<std::string>();
    if (!fs::exists(p)) throw ValidationError("--in", "listed file missing: " + f.at("path").get<std::string>());
    if (sha256_file(p) != f.at("sha256").get<std::string>())
      throw ValidationError("--in", "checksum mismatch: " + f.at("path").get<std::string>());
  }
}

std::string version_string() { return QFILTER_VERSION; }

void ensure_output_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw ValidationError("--out", "cannot create '" + dir.string() + "'");
  const fs::path probe = dir / ".qfilter-write-probe";
  {
    std::ofstream out(probe);
    if (!out) throw ValidationError("--out", "'" + dir.string() + "' is not writable");
  }
  fs::remove(probe, ec);
}

}  // namespace qfilter
