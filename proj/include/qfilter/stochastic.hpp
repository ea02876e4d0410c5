#pragma once

#include <array>
#include <cstdint>
#include <span>

#include "qfilter/linalg.hpp"

namespace qfilter {

using RMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Philox4x32-10 counter-based generator (Salmon et al., SC'11). The stream is a
// pure function of (key, counter), so any trajectory's noise can be regenerated
// without touching other streams.
class Philox4x32 {
 public:
  using Block = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  explicit Philox4x32(Key key) : key_(key) {}
  Block operator()(Block counter) const;

 private:
  Key key_;
};

// Standard normal pair from one Philox block. Two 53-bit uniforms are built from
// the four 32-bit words and mapped with Box-Muller (cos/sin branches). This
// mapping is fixed; golden files depend on it.
std::array<double, 2> normal_pair(const Philox4x32::Block& bits);

// Wiener increments dW[step, channel], i.i.d. N(0, dt).
struct NoisePath {
  double dt = 0.0;
  std::size_t n_steps = 0;
  std::size_t n_channels = 0;
  RMatrix dW;
  std::uint64_t master_seed = 0;
  std::uint64_t trajectory_index = 0;

  std::span<const double> row(std::size_t step) const {
    return {dW.data() + step * n_channels, n_channels};
  }

  // Sums `factor` consecutive increments; the result samples the same Brownian path at dt * factor.
  NoisePath coarsen(std::size_t factor) const;
};

NoisePath generate_noise(std::uint64_t master_seed, std::uint64_t trajectory_index, double dt, std::size_t n_steps,
                         std::size_t n_channels);

// Output record dY = 2 Re<L> dt + dW. `Y` has n_steps + 1 rows starting at zero.
struct MeasurementRecord {
  double dt = 0.0;
  std::size_t n_steps = 0;
  std::size_t n_channels = 0;
  RMatrix dY;
  RMatrix Y;
  RMatrix dW;  // innovation increments the record was built from

  std::span<const double> increment(std::size_t step) const {
    return {dY.data() + step * n_channels, n_channels};
  }
  std::span<const double> cumulative(std::size_t k) const { return {Y.data() + k * n_channels, n_channels}; }
};

// Empty record with storage for n_steps increments.
MeasurementRecord make_record(double dt, std::size_t n_steps, std::size_t n_channels);

// Writes step `k` of a record from the innovation and the current Re<L_j>.
void append_increment(MeasurementRecord& record, std::size_t k, std::span<const double> re_expect,
                      std::span<const double> dW);

// re_expect has shape [n_steps x n_channels].
MeasurementRecord record_from_innovation(const RMatrix& re_expect, const NoisePath& noise);

}  // namespace qfilter
