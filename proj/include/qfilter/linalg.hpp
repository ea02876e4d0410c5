#pragma once

#include <complex>
#include <cstddef>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "qfilter/errors.hpp"

namespace qfilter {

using Complex = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;
using RVector = Eigen::VectorXd;

inline constexpr Complex kI{0.0, 1.0};

// Uniform 1-D grid, endpoints included. Point i sits at x_min + i*dx.
struct Grid {
  double x_min = 0.0;
  double x_max = 1.0;
  std::size_t n_points = 0;

  double dx() const { return (x_max - x_min) / static_cast<double>(n_points - 1); }
  double x(std::size_t i) const { return x_min + static_cast<double>(i) * dx(); }
  RVector coordinates() const;

  bool operator==(const Grid&) const = default;
};

// Either a finite label set of size `dim` or a spatial grid. Grid bases carry
// the rectangle-rule weight dx in every inner product.
class Basis {
 public:
  static Basis finite(std::size_t dim);
  static Basis grid(const Grid& g);

  std::size_t dim() const noexcept { return dim_; }
  bool is_grid() const noexcept { return grid_.has_value(); }
  const Grid& grid_spec() const;
  double weight() const noexcept { return grid_ ? grid_->dx() : 1.0; }

  bool operator==(const Basis&) const = default;

 private:
  Basis() = default;
  std::size_t dim_ = 0;
  std::optional<Grid> grid_;
};

void require_same_basis(const Basis& a, const Basis& b, const char* where);

class StateVector {
 public:
  StateVector(Basis basis, CVector amplitudes);

  // Computational basis vector |index>.
  static StateVector basis_state(const Basis& basis, std::size_t index);

  const Basis& basis() const noexcept { return basis_; }
  const CVector& amplitudes() const noexcept { return amp_; }
  CVector& amplitudes() noexcept { return amp_; }
  std::size_t dim() const noexcept { return basis_.dim(); }

  double norm() const;
  StateVector normalized() const;
  bool is_normalized(double tol = 1e-12) const;

 private:
  Basis basis_;
  CVector amp_;
};

// <u|v> with the basis weight.
Complex inner(const StateVector& u, const StateVector& v);
Complex inner(const Basis& basis, const CVector& u, const CVector& v);
double weighted_norm(const Basis& basis, const CVector& v);

enum class Structure { dense, diagonal, tridiagonal };
enum class Hermiticity { hermitian, anti_hermitian, general };

// Complex matrix with a structure tag. Diagonal and tridiagonal operators are
// stored in banded form and applied in O(n); the hermiticity flag is verified
// once at construction.
class Operator {
 public:
  static constexpr double kHermitianTol = 1e-12;

  static Operator dense(const Basis& basis, CMatrix m, Hermiticity flag = Hermiticity::general);
  static Operator diagonal(const Basis& basis, CVector d, Hermiticity flag = Hermiticity::general);
  // lower[i] = M(i+1, i), upper[i] = M(i, i+1).
  static Operator tridiagonal(const Basis& basis, CVector lower, CVector diag, CVector upper,
                              Hermiticity flag = Hermiticity::general);
  static Operator zero(const Basis& basis);
  static Operator identity(const Basis& basis);

  const Basis& basis() const noexcept { return basis_; }
  std::size_t dim() const noexcept { return basis_.dim(); }
  Structure structure() const noexcept { return structure_; }
  Hermiticity hermiticity() const noexcept { return flag_; }
  bool is_hermitian() const noexcept { return flag_ == Hermiticity::hermitian; }

  // Band storage; valid for diagonal/tridiagonal operators only.
  const CVector& diag() const;
  const CVector& lower() const;
  const CVector& upper() const;

  CMatrix to_dense() const;
  Complex entry(std::size_t row, std::size_t col) const;

  CVector apply(const CVector& v) const;
  CVector apply_adjoint(const CVector& v) const;
  StateVector apply(const StateVector& v) const;

  Operator adjoint() const;
  bool is_zero(double tol = 0.0) const;

  // Largest |M_ij - conj(M_ji)|.
  double hermitian_defect() const;

  // Returns D^-1 M D with D = diag(exp(s)), i.e. entries M_ik * exp(s_k - s_i).
  Operator conjugated_by_diagonal(const RVector& s) const;

  friend Operator operator+(const Operator& a, const Operator& b);
  friend Operator operator-(const Operator& a, const Operator& b);
  friend Operator operator*(Complex s, const Operator& a);
  friend Operator operator*(const Operator& a, const Operator& b);

 private:
  Operator(Basis basis, Structure s, Hermiticity flag);
  void check_flag() const;

  Basis basis_;
  Structure structure_;
  Hermiticity flag_;
  CMatrix dense_;
  CVector diag_, lower_, upper_;
};

class DensityMatrix {
 public:
  static constexpr double kHermitianTol = 1e-10;
  static constexpr double kTraceTol = 1e-8;
  static constexpr double kPsdTol = 1e-8;

  // Validating constructor.
  DensityMatrix(Basis basis, CMatrix entries);
  // Skips validation; for integrator internals and averaged quantities.
  static DensityMatrix unchecked(Basis basis, CMatrix entries);

  const Basis& basis() const noexcept { return basis_; }
  const CMatrix& entries() const noexcept { return rho_; }
  Complex trace() const { return rho_.trace(); }
  double hermitian_defect() const;
  double min_eigenvalue() const;
  // Tr(rho Z).
  Complex expectation(const Operator& op) const;

 private:
  struct NoCheck {};
  DensityMatrix(Basis basis, CMatrix entries, NoCheck);
  Basis basis_;
  CMatrix rho_;
};

Complex expectation(const StateVector& state, const Operator& op);

// |v><v| in weighted coordinates so that the trace equals <v|v>.
DensityMatrix projector(const StateVector& state);

double trace_distance(const DensityMatrix& a, const DensityMatrix& b);

// Trace distance between the rays of two (not necessarily normalized) pure states.
double pure_trace_distance(const StateVector& a, const StateVector& b);

// exp(scale * op). Hermitian input goes through an eigendecomposition,
// diagonal input is exponentiated elementwise, anything else uses Pade
// scaling-and-squaring.
inline constexpr std::size_t kDefaultOracleCap = 512;
Operator matrix_exp(const Operator& op, Complex scale, std::size_t cap = kDefaultOracleCap);

// Pauli matrices on a 2-level finite basis.
Operator sigma_x();
Operator sigma_y();
Operator sigma_z();

}  // namespace qfilter
