#include "qfilter/stochastic.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace qfilter {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

// Uniform in (0, 1] from 53 random bits.
inline double uniform53(std::uint32_t hi, std::uint32_t lo) {
  const std::uint64_t bits = (static_cast<std::uint64_t>(hi >> 5) << 26) | (lo >> 6);
  return (static_cast<double>(bits) + 1.0) * 0x1.0p-53;
}

}  // namespace

Philox4x32::Block Philox4x32::operator()(Block ctr) const {
  Key key = key_;
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kMul0, ctr[0], hi0, lo0);
    mulhilo(kMul1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kWeyl0;
    key[1] += kWeyl1;
  }
  return ctr;
}

std::array<double, 2> normal_pair(const Philox4x32::Block& bits) {
  const double u1 = uniform53(bits[0], bits[1]);
  const double u2 = uniform53(bits[2], bits[3]);
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  return {r * std::cos(theta), r * std::sin(theta)};
}

NoisePath NoisePath::coarsen(std::size_t factor) const {
  if (factor == 0 || n_steps % factor != 0) {
    throw ContractError("coarsen: factor must divide the number of steps");
  }
  NoisePath out;
  out.dt = dt * static_cast<double>(factor);
  out.n_steps = n_steps / factor;
  out.n_channels = n_channels;
  out.master_seed = master_seed;
  out.trajectory_index = trajectory_index;
  out.dW = RMatrix::Zero(static_cast<Eigen::Index>(out.n_steps), static_cast<Eigen::Index>(n_channels));
  for (std::size_t k = 0; k < n_steps; ++k) {
    out.dW.row(static_cast<Eigen::Index>(k / factor)) += dW.row(static_cast<Eigen::Index>(k));
  }
  return out;
}

NoisePath generate_noise(std::uint64_t master_seed, std::uint64_t trajectory_index, double dt, std::size_t n_steps,
                         std::size_t n_channels) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ContractError("generate_noise: dt must be positive");
  if (n_steps < 1) throw ContractError("generate_noise: n_steps must be >= 1");
  if (n_channels > 0 && n_steps > std::numeric_limits<std::size_t>::max() / n_channels / sizeof(double)) {
    throw ContractError("generate_noise: n_steps * n_channels overflows");
  }
  NoisePath path;
  path.dt = dt;
  path.n_steps = n_steps;
  path.n_channels = n_channels;
  path.master_seed = master_seed;
  path.trajectory_index = trajectory_index;
  path.dW.resize(static_cast<Eigen::Index>(n_steps), static_cast<Eigen::Index>(n_channels));

  const Philox4x32 rng({static_cast<std::uint32_t>(master_seed), static_cast<std::uint32_t>(master_seed >> 32)});
  const auto tlo = static_cast<std::uint32_t>(trajectory_index);
  const auto thi = static_cast<std::uint32_t>(trajectory_index >> 32);
  const double scale = std::sqrt(dt);

  // Row-major flat index f uses block f / 2, component f % 2.
  double* out = path.dW.data();
  const std::size_t total = n_steps * n_channels;
  for (std::size_t f = 0; f < total; f += 2) {
    const std::uint64_t block = f / 2;
    const auto z = normal_pair(rng({static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(block >> 32), tlo, thi}));
    out[f] = scale * z[0];
    if (f + 1 < total) out[f + 1] = scale * z[1];
  }
  return path;
}

MeasurementRecord make_record(double dt, std::size_t n_steps, std::size_t n_channels) {
  MeasurementRecord rec;
  rec.dt = dt;
  rec.n_steps = n_steps;
  rec.n_channels = n_channels;
  const auto nc = static_cast<Eigen::Index>(n_channels);
  rec.dY = RMatrix::Zero(static_cast<Eigen::Index>(n_steps), nc);
  rec.dW = RMatrix::Zero(static_cast<Eigen::Index>(n_steps), nc);
  rec.Y = RMatrix::Zero(static_cast<Eigen::Index>(n_steps + 1), nc);
  return rec;
}

void append_increment(MeasurementRecord& rec, std::size_t k, std::span<const double> re_expect,
                      std::span<const double> dW) {
  if (k >= rec.n_steps || re_expect.size() != rec.n_channels || dW.size() != rec.n_channels) {
    throw DimensionError("append_increment: index or channel count mismatch");
  }
  const auto row = static_cast<Eigen::Index>(k);
  for (std::size_t j = 0; j < rec.n_channels; ++j) {
    const auto c = static_cast<Eigen::Index>(j);
    const double dy = 2.0 * re_expect[j] * rec.dt + dW[j];
    rec.dW(row, c) = dW[j];
    rec.dY(row, c) = dy;
    rec.Y(row + 1, c) = rec.Y(row, c) + dy;
  }
}

MeasurementRecord record_from_innovation(const RMatrix& re_expect, const NoisePath& noise) {
  if (static_cast<std::size_t>(re_expect.rows()) != noise.n_steps ||
      static_cast<std::size_t>(re_expect.cols()) != noise.n_channels) {
    throw DimensionError("record_from_innovation: expectation series shape does not match noise path");
  }
  MeasurementRecord rec = make_record(noise.dt, noise.n_steps, noise.n_channels);
  for (std::size_t k = 0; k < noise.n_steps; ++k) {
    append_increment(rec, k, {re_expect.data() + k * noise.n_channels, noise.n_channels}, noise.row(k));
  }
  return rec;
}

}  // namespace qfilter
