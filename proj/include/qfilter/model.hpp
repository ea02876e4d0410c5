#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "qfilter/linalg.hpp"

namespace qfilter {

// Static potential energy sampled on a grid.
class GridPotential {
 public:
  static GridPotential free(const Grid& grid);
  // V = m * omega^2 * x^2 / 2
  static GridPotential harmonic(const Grid& grid, double omega, double mass = 1.0);
  // Square barrier of the given height on |x| <= width / 2.
  static GridPotential barrier(const Grid& grid, double height, double width);
  static GridPotential table(const Grid& grid, std::vector<double> values);

  const RVector& values() const noexcept { return values_; }
  const std::string& preset() const noexcept { return preset_; }

 private:
  GridPotential(std::string preset, RVector values);
  std::string preset_;
  RVector values_;
};

// Physical model of an observed system: H, the measurement channels L_j and
// the derived generator K = sum_j L_j^dag L_j / 2 + i H / hbar.
struct ModelSpec {
  Basis basis = Basis::finite(1);
  Operator hamiltonian = Operator::zero(Basis::finite(1));
  std::vector<Operator> channels;
  Operator K = Operator::zero(Basis::finite(1));
  double lambda = 0.0;
  double mass = 1.0;
  double hbar = 1.0;
  std::optional<GridPotential> potential;

  std::size_t dim() const noexcept { return basis.dim(); }
  std::size_t n_channels() const noexcept { return channels.size(); }
  bool is_grid() const noexcept { return basis.is_grid(); }

  // Re-checks every structural invariant; throws ContractError on failure.
  void validate() const;
};

inline constexpr double kModelTol = 1e-12;

Operator assemble_K(const Operator& hamiltonian, const std::vector<Operator>& channels, double hbar);

// Generic finite-dimensional model; H must be flagged hermitian.
ModelSpec build_model(const Operator& hamiltonian, std::vector<Operator> channels, double lambda,
                      double hbar = 1.0);

// H = (hbar / 2) h.sigma, single channel sqrt(2 lambda) * channel_op (sigma_z by default).
ModelSpec build_qubit_model(const std::array<double, 3>& h_field, double lambda,
                            const std::optional<Operator>& channel_op = std::nullopt, double hbar = 1.0);

// H = -(hbar^2 / 2m) D2 + diag(V) with hard-wall boundaries, L = sqrt(2 lambda) x.
ModelSpec build_grid_model(const Grid& grid, const GridPotential& potential, double mass, double lambda,
                           double hbar = 1.0);

// Position operator and the central-difference momentum -i hbar D1 on a grid basis.
Operator position_operator(const Basis& basis);
Operator position_squared_operator(const Basis& basis);
Operator momentum_operator(const Basis& basis, double hbar);

// Normalized Gaussian packet with <x> = x0, <p> = p0 and Var(x) = sigma^2.
StateVector gaussian_packet(const Basis& basis, double x0, double p0, double sigma, double hbar = 1.0);

}  // namespace qfilter
