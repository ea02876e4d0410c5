#include "qfilter/model.hpp"

#include <cmath>
#include <utility>

namespace qfilter {

namespace {

constexpr std::size_t kMinGridPoints = 8;

RVector sample(const Grid& grid, auto&& f) {
  RVector v(static_cast<Eigen::Index>(grid.n_points));
  for (std::size_t i = 0; i < grid.n_points; ++i) v[static_cast<Eigen::Index>(i)] = f(grid.x(i));
  return v;
}

}  // namespace

GridPotential::GridPotential(std::string preset, RVector values)
    : preset_(std::move(preset)), values_(std::move(values)) {
  if (!values_.allFinite()) throw ValidationError("model.grid.potential", "potential values must be finite");
}

GridPotential GridPotential::free(const Grid& grid) {
  return {"free", RVector::Zero(static_cast<Eigen::Index>(grid.n_points))};
}

GridPotential GridPotential::harmonic(const Grid& grid, double omega, double mass) {
  return {"harmonic", sample(grid, [&](double x) { return 0.5 * mass * omega * omega * x * x; })};
}

GridPotential GridPotential::barrier(const Grid& grid, double height, double width) {
  return {"barrier", sample(grid, [&](double x) { return std::abs(x) <= 0.5 * width ? height : 0.0; })};
}

GridPotential GridPotential::table(const Grid& grid, std::vector<double> values) {
  if (values.size() != grid.n_points) {
    throw ValidationError("model.grid.potential.values", "table length must equal n_points");
  }
  return {"table", Eigen::Map<const RVector>(values.data(), static_cast<Eigen::Index>(values.size()))};
}

Operator assemble_K(const Operator& hamiltonian, const std::vector<Operator>& channels, double hbar) {
  if (!hamiltonian.is_hermitian()) throw ContractError("assemble_K: hamiltonian must be flagged hermitian");
  if (!(hbar > 0.0)) throw ContractError("assemble_K: hbar must be positive");
  Operator K = Complex(0.0, 1.0 / hbar) * hamiltonian;
  for (const auto& L : channels) {
    require_same_basis(L.basis(), hamiltonian.basis(), "assemble_K");
    K = K + Complex(0.5) * (L.adjoint() * L);
  }
  return K;
}

void ModelSpec::validate() const {
  require_same_basis(hamiltonian.basis(), basis, "ModelSpec");
  if (!hamiltonian.is_hermitian() || hamiltonian.hermitian_defect() > kModelTol) {
    throw ContractError("ModelSpec: hamiltonian is not hermitian");
  }
  if (!(lambda >= 0.0)) throw ContractError("ModelSpec: lambda must be >= 0");
  if (!(hbar > 0.0) || !(mass > 0.0)) throw ContractError("ModelSpec: hbar and mass must be positive");

  CMatrix sum_ll = CMatrix::Zero(static_cast<Eigen::Index>(dim()), static_cast<Eigen::Index>(dim()));
  for (const auto& L : channels) {
    require_same_basis(L.basis(), basis, "ModelSpec channel");
    if (lambda == 0.0 && !L.is_zero()) throw ContractError("ModelSpec: lambda = 0 requires zero channels");
    const CMatrix l = L.to_dense();
    sum_ll += l.adjoint() * l;
  }
  const CMatrix k = K.to_dense();
  const CMatrix h = hamiltonian.to_dense();
  const CMatrix expected = 0.5 * sum_ll + Complex(0.0, 1.0 / hbar) * h;
  if ((k - expected).cwiseAbs().maxCoeff() > kModelTol) throw ContractError("ModelSpec: K is inconsistent with H, L");
}

ModelSpec build_model(const Operator& hamiltonian, std::vector<Operator> channels, double lambda, double hbar) {
  if (!(lambda >= 0.0)) throw ValidationError("constants.lambda", "lambda must be >= 0");
  if (!(hbar > 0.0)) throw ValidationError("constants.hbar", "hbar must be positive");
  ModelSpec m;
  m.basis = hamiltonian.basis();
  m.hamiltonian = hamiltonian;
  m.channels = std::move(channels);
  m.lambda = lambda;
  m.hbar = hbar;
  m.K = assemble_K(m.hamiltonian, m.channels, hbar);
  m.validate();
  return m;
}

ModelSpec build_qubit_model(const std::array<double, 3>& h_field, double lambda,
                            const std::optional<Operator>& channel_op, double hbar) {
  if (!(lambda >= 0.0)) throw ValidationError("constants.lambda", "lambda must be >= 0");
  const Operator H = Complex(0.5 * hbar * h_field[0]) * sigma_x() + Complex(0.5 * hbar * h_field[1]) * sigma_y() +
                     Complex(0.5 * hbar * h_field[2]) * sigma_z();
  const Operator base = channel_op.value_or(sigma_z());
  if (base.dim() != 2) throw DimensionError("qubit channel operator must be 2x2");
  Operator L = Complex(std::sqrt(2.0 * lambda)) * base;
  // A dense zero carries no structure information worth keeping.
  if (lambda == 0.0) L = Operator::zero(base.basis());
  return build_model(H, {L}, lambda, hbar);
}

ModelSpec build_grid_model(const Grid& grid, const GridPotential& potential, double mass, double lambda,
                           double hbar) {
  std::vector<FieldIssue> issues;
  if (grid.n_points < kMinGridPoints) issues.push_back({"model.grid.n_points", "must be at least 8"});
  if (!(grid.x_max > grid.x_min)) issues.push_back({"model.grid.x_max", "grid must be monotone (x_max > x_min)"});
  if (!(mass > 0.0)) issues.push_back({"model.grid.mass", "mass must be positive"});
  if (!(hbar > 0.0)) issues.push_back({"constants.hbar", "hbar must be positive"});
  if (!(lambda >= 0.0)) issues.push_back({"constants.lambda", "lambda must be >= 0"});
  if (!issues.empty()) throw ValidationError(std::move(issues));
  if (static_cast<std::size_t>(potential.values().size()) != grid.n_points) {
    throw ValidationError("model.grid.potential", "potential length must equal n_points");
  }

  const Basis basis = Basis::grid(grid);
  const Eigen::Index n = static_cast<Eigen::Index>(grid.n_points);
  const double dx = grid.dx();
  const double kinetic = hbar * hbar / (2.0 * mass * dx * dx);

  CVector diag = (2.0 * kinetic + potential.values().array()).cast<Complex>();
  CVector off = CVector::Constant(n - 1, Complex(-kinetic));
  const Operator H = Operator::tridiagonal(basis, off, diag, off, Hermiticity::hermitian);

  const Operator L = Complex(std::sqrt(2.0 * lambda)) * position_operator(basis);
  ModelSpec m = build_model(H, {L}, lambda, hbar);
  m.mass = mass;
  m.potential = potential;
  return m;
}

Operator position_operator(const Basis& basis) {
  return Operator::diagonal(basis, basis.grid_spec().coordinates().cast<Complex>(), Hermiticity::hermitian);
}

Operator position_squared_operator(const Basis& basis) {
  return Operator::diagonal(basis, basis.grid_spec().coordinates().array().square().cast<Complex>().matrix(),
                            Hermiticity::hermitian);
}

Operator momentum_operator(const Basis& basis, double hbar) {
  const Grid& g = basis.grid_spec();
  const Eigen::Index n = static_cast<Eigen::Index>(g.n_points);
  // -i hbar (psi_{i+1} - psi_{i-1}) / (2 dx)
  const Complex c = Complex(0.0, -hbar / (2.0 * g.dx()));
  return Operator::tridiagonal(basis, CVector::Constant(n - 1, -c), CVector::Zero(n), CVector::Constant(n - 1, c),
                               Hermiticity::hermitian);
}

StateVector gaussian_packet(const Basis& basis, double x0, double p0, double sigma, double hbar) {
  if (!(sigma > 0.0)) throw ValidationError("initial.gaussian.sigma", "sigma must be positive");
  const Grid& g = basis.grid_spec();
  CVector v(static_cast<Eigen::Index>(g.n_points));
  for (std::size_t i = 0; i < g.n_points; ++i) {
    const double x = g.x(i);
    const double d = x - x0;
    v[static_cast<Eigen::Index>(i)] = std::exp(Complex(-d * d / (4.0 * sigma * sigma), p0 * x / hbar));
  }
  return StateVector(basis, std::move(v)).normalized();
}

}  // namespace qfilter
