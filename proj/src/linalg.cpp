#include "qfilter/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

namespace qfilter {

RVector Grid::coordinates() const {
  RVector xs(static_cast<Eigen::Index>(n_points));
  for (std::size_t i = 0; i < n_points; ++i) xs[static_cast<Eigen::Index>(i)] = x(i);
  return xs;
}

Basis Basis::finite(std::size_t dim) {
  if (dim == 0) throw DimensionError("basis dimension must be positive");
  Basis b;
  b.dim_ = dim;
  return b;
}

Basis Basis::grid(const Grid& g) {
  if (g.n_points < 2) throw DimensionError("grid needs at least two points");
  if (!(g.x_max > g.x_min)) throw DimensionError("grid requires x_max > x_min");
  Basis b;
  b.dim_ = g.n_points;
  b.grid_ = g;
  return b;
}

const Grid& Basis::grid_spec() const {
  if (!grid_) throw UnsupportedError("basis is not a spatial grid");
  return *grid_;
}

void require_same_basis(const Basis& a, const Basis& b, const char* where) {
  if (!(a == b)) {
    throw DimensionError(std::string(where) + ": basis mismatch (" + std::to_string(a.dim()) +
                         " vs " + std::to_string(b.dim()) + ")");
  }
}

// ---------------------------------------------------------------------------
// StateVector

StateVector::StateVector(Basis basis, CVector amplitudes)
    : basis_(std::move(basis)), amp_(std::move(amplitudes)) {
  if (static_cast<std::size_t>(amp_.size()) != basis_.dim()) {
    throw DimensionError("state amplitude count " + std::to_string(amp_.size()) +
                         " does not match basis dimension " + std::to_string(basis_.dim()));
  }
}

StateVector StateVector::basis_state(const Basis& basis, std::size_t index) {
  if (index >= basis.dim()) throw DimensionError("basis_state index out of range");
  CVector v = CVector::Zero(static_cast<Eigen::Index>(basis.dim()));
  v[static_cast<Eigen::Index>(index)] = 1.0 / std::sqrt(basis.weight());
  return {basis, std::move(v)};
}

double StateVector::norm() const { return weighted_norm(basis_, amp_); }

StateVector StateVector::normalized() const {
  const double n = norm();
  if (!(n > 0.0) || !std::isfinite(n)) throw ContractError("cannot normalize a zero or non-finite state");
  return {basis_, amp_ / n};
}

bool StateVector::is_normalized(double tol) const { return std::abs(norm() - 1.0) <= tol; }

Complex inner(const Basis& basis, const CVector& u, const CVector& v) {
  return basis.weight() * u.dot(v);  // Eigen's dot conjugates the first argument.
}

Complex inner(const StateVector& u, const StateVector& v) {
  require_same_basis(u.basis(), v.basis(), "inner");
  return inner(u.basis(), u.amplitudes(), v.amplitudes());
}

double weighted_norm(const Basis& basis, const CVector& v) {
  return std::sqrt(basis.weight()) * v.norm();
}

// ---------------------------------------------------------------------------
// Operator

Operator::Operator(Basis basis, Structure s, Hermiticity flag)
    : basis_(std::move(basis)), structure_(s), flag_(flag) {}

Operator Operator::dense(const Basis& basis, CMatrix m, Hermiticity flag) {
  const auto n = static_cast<Eigen::Index>(basis.dim());
  if (m.rows() != n || m.cols() != n) throw DimensionError("dense operator size does not match basis");
  Operator op(basis, Structure::dense, flag);
  op.dense_ = std::move(m);
  op.check_flag();
  return op;
}

Operator Operator::diagonal(const Basis& basis, CVector d, Hermiticity flag) {
  if (static_cast<std::size_t>(d.size()) != basis.dim()) {
    throw DimensionError("diagonal operator size does not match basis");
  }
  Operator op(basis, Structure::diagonal, flag);
  op.diag_ = std::move(d);
  op.check_flag();
  return op;
}

Operator Operator::tridiagonal(const Basis& basis, CVector lower, CVector diag, CVector upper,
                               Hermiticity flag) {
  const auto n = static_cast<Eigen::Index>(basis.dim());
  if (diag.size() != n || lower.size() != n - 1 || upper.size() != n - 1) {
    throw DimensionError("tridiagonal operator bands do not match basis");
  }
  Operator op(basis, Structure::tridiagonal, flag);
  op.lower_ = std::move(lower);
  op.diag_ = std::move(diag);
  op.upper_ = std::move(upper);
  op.check_flag();
  return op;
}

Operator Operator::zero(const Basis& basis) {
  return diagonal(basis, CVector::Zero(static_cast<Eigen::Index>(basis.dim())), Hermiticity::hermitian);
}

Operator Operator::identity(const Basis& basis) {
  return diagonal(basis, CVector::Ones(static_cast<Eigen::Index>(basis.dim())), Hermiticity::hermitian);
}

const CVector& Operator::diag() const {
  if (structure_ == Structure::dense) throw UnsupportedError("dense operator has no band storage");
  return diag_;
}

const CVector& Operator::lower() const {
  if (structure_ != Structure::tridiagonal) throw UnsupportedError("operator is not tridiagonal");
  return lower_;
}

const CVector& Operator::upper() const {
  if (structure_ != Structure::tridiagonal) throw UnsupportedError("operator is not tridiagonal");
  return upper_;
}

void Operator::check_flag() const {
  switch (flag_) {
    case Hermiticity::general:
      return;
    case Hermiticity::hermitian:
      if (hermitian_defect() > kHermitianTol) throw ContractError("operator flagged hermitian is not hermitian");
      return;
    case Hermiticity::anti_hermitian:
      if ((Complex(0.0, 1.0) * *this).hermitian_defect() > kHermitianTol) {
        throw ContractError("operator flagged anti-hermitian is not anti-hermitian");
      }
      return;
  }
}

CMatrix Operator::to_dense() const {
  const auto n = static_cast<Eigen::Index>(dim());
  switch (structure_) {
    case Structure::dense:
      return dense_;
    case Structure::diagonal: {
      CMatrix m = CMatrix::Zero(n, n);
      m.diagonal() = diag_;
      return m;
    }
    case Structure::tridiagonal: {
      CMatrix m = CMatrix::Zero(n, n);
      m.diagonal() = diag_;
      m.diagonal(-1) = lower_;
      m.diagonal(1) = upper_;
      return m;
    }
  }
  return {};
}

Complex Operator::entry(std::size_t row, std::size_t col) const {
  const auto r = static_cast<Eigen::Index>(row);
  const auto c = static_cast<Eigen::Index>(col);
  switch (structure_) {
    case Structure::dense:
      return dense_(r, c);
    case Structure::diagonal:
      return r == c ? diag_[r] : Complex{};
    case Structure::tridiagonal:
      if (r == c) return diag_[r];
      if (r == c + 1) return lower_[c];
      if (c == r + 1) return upper_[r];
      return {};
  }
  return {};
}

CVector Operator::apply(const CVector& v) const {
  if (static_cast<std::size_t>(v.size()) != dim()) throw DimensionError("operator apply: size mismatch");
  switch (structure_) {
    case Structure::dense:
      return dense_ * v;
    case Structure::diagonal:
      return diag_.cwiseProduct(v);
    case Structure::tridiagonal: {
      const Eigen::Index n = v.size();
      CVector out = diag_.cwiseProduct(v);
      out.tail(n - 1) += lower_.cwiseProduct(v.head(n - 1));
      out.head(n - 1) += upper_.cwiseProduct(v.tail(n - 1));
      return out;
    }
  }
  return {};
}

CVector Operator::apply_adjoint(const CVector& v) const {
  if (static_cast<std::size_t>(v.size()) != dim()) throw DimensionError("operator apply: size mismatch");
  switch (structure_) {
    case Structure::dense:
      return dense_.adjoint() * v;
    case Structure::diagonal:
      return diag_.conjugate().cwiseProduct(v);
    case Structure::tridiagonal: {
      const Eigen::Index n = v.size();
      CVector out = diag_.conjugate().cwiseProduct(v);
      out.tail(n - 1) += upper_.conjugate().cwiseProduct(v.head(n - 1));
      out.head(n - 1) += lower_.conjugate().cwiseProduct(v.tail(n - 1));
      return out;
    }
  }
  return {};
}

StateVector Operator::apply(const StateVector& v) const {
  require_same_basis(basis_, v.basis(), "Operator::apply");
  return {basis_, apply(v.amplitudes())};
}

Operator Operator::adjoint() const {
  Hermiticity flag = flag_;
  switch (structure_) {
    case Structure::dense:
      return dense(basis_, dense_.adjoint(), flag);
    case Structure::diagonal:
      return diagonal(basis_, diag_.conjugate(), flag);
    case Structure::tridiagonal:
      return tridiagonal(basis_, upper_.conjugate(), diag_.conjugate(), lower_.conjugate(), flag);
  }
  return *this;
}

bool Operator::is_zero(double tol) const {
  switch (structure_) {
    case Structure::dense:
      return dense_.cwiseAbs().maxCoeff() <= tol;
    case Structure::diagonal:
      return diag_.size() == 0 || diag_.cwiseAbs().maxCoeff() <= tol;
    case Structure::tridiagonal:
      return diag_.cwiseAbs().maxCoeff() <= tol && (lower_.size() == 0 || (lower_.cwiseAbs().maxCoeff() <= tol &&
                                                                         upper_.cwiseAbs().maxCoeff() <= tol));
  }
  return false;
}

double Operator::hermitian_defect() const {
  switch (structure_) {
    case Structure::dense:
      return (dense_ - dense_.adjoint()).cwiseAbs().maxCoeff();
    case Structure::diagonal:
      return diag_.imag().cwiseAbs().maxCoeff();
    case Structure::tridiagonal: {
      double d = diag_.imag().cwiseAbs().maxCoeff();
      if (lower_.size() > 0) d = std::max(d, (lower_ - upper_.conjugate()).cwiseAbs().maxCoeff());
      return d;
    }
  }
  return 0.0;
}

Operator Operator::conjugated_by_diagonal(const RVector& s) const {
  if (static_cast<std::size_t>(s.size()) != dim()) throw DimensionError("conjugation exponent size mismatch");
  switch (structure_) {
    case Structure::diagonal:
      return diagonal(basis_, diag_);
    case Structure::tridiagonal: {
      const Eigen::Index n = s.size();
      CVector lo(n - 1), up(n - 1);
      for (Eigen::Index i = 0; i + 1 < n; ++i) {
        lo[i] = lower_[i] * std::exp(s[i] - s[i + 1]);  // entry (i+1, i)
        up[i] = upper_[i] * std::exp(s[i + 1] - s[i]);  // entry (i, i+1)
      }
      return tridiagonal(basis_, std::move(lo), diag_, std::move(up));
    }
    case Structure::dense: {
      CMatrix m = dense_;
      for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index k = 0; k < m.cols(); ++k) {
          if (i != k) m(i, k) *= std::exp(s[k] - s[i]);
        }
      }
      return dense(basis_, std::move(m));
    }
  }
  return *this;
}

namespace {

int band_width(Structure s) {
  switch (s) {
    case Structure::diagonal:
      return 0;
    case Structure::tridiagonal:
      return 1;
    case Structure::dense:
      return 2;
  }
  return 2;
}

Operator with_width(const Basis& basis, int width, const CMatrix& m) {
  if (width == 0) return Operator::diagonal(basis, m.diagonal());
  if (width == 1) return Operator::tridiagonal(basis, m.diagonal(-1), m.diagonal(), m.diagonal(1));
  return Operator::dense(basis, m);
}

// Hermitian + hermitian stays hermitian; anything else is general.
Hermiticity sum_flag(Hermiticity a, Hermiticity b) {
  return a == b ? a : Hermiticity::general;
}

}  // namespace

Operator operator+(const Operator& a, const Operator& b) {
  require_same_basis(a.basis_, b.basis_, "operator+");
  const Hermiticity flag = sum_flag(a.flag_, b.flag_);
  if (a.structure_ == b.structure_) {
    switch (a.structure_) {
      case Structure::diagonal:
        return Operator::diagonal(a.basis_, a.diag_ + b.diag_, flag);
      case Structure::tridiagonal:
        return Operator::tridiagonal(a.basis_, a.lower_ + b.lower_, a.diag_ + b.diag_, a.upper_ + b.upper_, flag);
      case Structure::dense:
        return Operator::dense(a.basis_, a.dense_ + b.dense_, flag);
    }
  }
  const int w = std::max(band_width(a.structure_), band_width(b.structure_));
  Operator out = with_width(a.basis_, w, a.to_dense() + b.to_dense());
  out.flag_ = flag;
  return out;
}

Operator operator-(const Operator& a, const Operator& b) { return a + Complex(-1.0) * b; }

Operator operator*(Complex s, const Operator& a) {
  Hermiticity flag = Hermiticity::general;
  if (s.imag() == 0.0) {
    flag = a.flag_;
  } else if (s.real() == 0.0 && a.flag_ != Hermiticity::general) {
    flag = a.flag_ == Hermiticity::hermitian ? Hermiticity::anti_hermitian : Hermiticity::hermitian;
  }
  Operator out(a.basis_, a.structure_, flag);
  out.dense_ = s * a.dense_;
  out.diag_ = s * a.diag_;
  out.lower_ = s * a.lower_;
  out.upper_ = s * a.upper_;
  return out;
}

Operator operator*(const Operator& a, const Operator& b) {
  require_same_basis(a.basis_, b.basis_, "operator*");
  if (a.structure_ == Structure::diagonal && b.structure_ == Structure::diagonal) {
    return Operator::diagonal(a.basis_, a.diag_.cwiseProduct(b.diag_));
  }
  if (a.structure_ == Structure::diagonal && b.structure_ == Structure::tridiagonal) {
    const Eigen::Index n = a.diag_.size();
    return Operator::tridiagonal(a.basis_, a.diag_.tail(n - 1).cwiseProduct(b.lower_),
                                 a.diag_.cwiseProduct(b.diag_), a.diag_.head(n - 1).cwiseProduct(b.upper_));
  }
  if (a.structure_ == Structure::tridiagonal && b.structure_ == Structure::diagonal) {
    const Eigen::Index n = b.diag_.size();
    return Operator::tridiagonal(a.basis_, a.lower_.cwiseProduct(b.diag_.head(n - 1)),
                                 a.diag_.cwiseProduct(b.diag_), a.upper_.cwiseProduct(b.diag_.tail(n - 1)));
  }
  return Operator::dense(a.basis_, a.to_dense() * b.to_dense());
}

// ---------------------------------------------------------------------------
// DensityMatrix

DensityMatrix::DensityMatrix(Basis basis, CMatrix entries, NoCheck)
    : basis_(std::move(basis)), rho_(std::move(entries)) {
  const auto n = static_cast<Eigen::Index>(basis_.dim());
  if (rho_.rows() != n || rho_.cols() != n) throw DimensionError("density matrix size does not match basis");
}

DensityMatrix::DensityMatrix(Basis basis, CMatrix entries) : DensityMatrix(std::move(basis), std::move(entries), NoCheck{}) {
  if (hermitian_defect() > kHermitianTol) throw ContractError("density matrix is not hermitian");
  if (std::abs(trace() - 1.0) > kTraceTol) throw ContractError("density matrix trace is not 1");
  if (min_eigenvalue() < -kPsdTol) throw ContractError("density matrix is not positive semidefinite");
}

DensityMatrix DensityMatrix::unchecked(Basis basis, CMatrix entries) {
  return {std::move(basis), std::move(entries), NoCheck{}};
}

double DensityMatrix::hermitian_defect() const { return (rho_ - rho_.adjoint()).cwiseAbs().maxCoeff(); }

double DensityMatrix::min_eigenvalue() const {
  const CMatrix h = 0.5 * (rho_ + rho_.adjoint());
  Eigen::SelfAdjointEigenSolver<CMatrix> es(h, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

Complex DensityMatrix::expectation(const Operator& op) const {
  require_same_basis(basis_, op.basis(), "DensityMatrix::expectation");
  return (rho_ * op.to_dense()).trace();
}

// ---------------------------------------------------------------------------
// Free functions

Complex expectation(const StateVector& state, const Operator& op) {
  require_same_basis(state.basis(), op.basis(), "expectation");
  const Complex z = inner(state.basis(), state.amplitudes(), op.apply(state.amplitudes()));
  if (op.is_hermitian()) return {z.real(), 0.0};
  return z;
}

DensityMatrix projector(const StateVector& state) {
  if (std::abs(state.norm() - 1.0) > 1e-6) throw ContractError("projector requires a normalized state");
  const CVector& v = state.amplitudes();
  return DensityMatrix::unchecked(state.basis(), state.basis().weight() * (v * v.adjoint()));
}

double trace_distance(const DensityMatrix& a, const DensityMatrix& b) {
  require_same_basis(a.basis(), b.basis(), "trace_distance");
  CMatrix diff = a.entries() - b.entries();
  diff = 0.5 * (diff + diff.adjoint()).eval();
  Eigen::SelfAdjointEigenSolver<CMatrix> es(diff, Eigen::EigenvaluesOnly);
  return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

double pure_trace_distance(const StateVector& a, const StateVector& b) {
  require_same_basis(a.basis(), b.basis(), "pure_trace_distance");
  const double na = a.norm();
  const double nb = b.norm();
  if (!(na > 0.0) || !(nb > 0.0)) throw ContractError("pure_trace_distance requires nonzero states");
  const double overlap = std::abs(inner(a, b)) / (na * nb);
  return std::sqrt(std::max(0.0, 1.0 - overlap * overlap));
}

Operator matrix_exp(const Operator& op, Complex scale, std::size_t cap) {
  const Basis& basis = op.basis();
  if (op.structure() == Structure::diagonal) {
    CVector d = (scale * op.diag()).array().exp();
    return Operator::diagonal(basis, std::move(d));
  }
  if (op.dim() > cap) {
    throw UnsupportedError("matrix_exp: dimension " + std::to_string(op.dim()) + " exceeds oracle cap " +
                           std::to_string(cap));
  }
  const CMatrix m = op.to_dense();
  if (op.is_hermitian()) {
    Eigen::SelfAdjointEigenSolver<CMatrix> es(m);
    const CVector phases = (scale * es.eigenvalues().cast<Complex>()).array().exp();
    return Operator::dense(basis, es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint());
  }
  const CMatrix scaled = scale * m;
  return Operator::dense(basis, scaled.exp());
}

Operator sigma_x() {
  CMatrix m(2, 2);
  m << 0, 1, 1, 0;
  return Operator::dense(Basis::finite(2), m, Hermiticity::hermitian);
}

Operator sigma_y() {
  CMatrix m(2, 2);
  m << 0, -kI, kI, 0;
  return Operator::dense(Basis::finite(2), m, Hermiticity::hermitian);
}

Operator sigma_z() {
  return Operator::diagonal(Basis::finite(2), CVector{{1.0, -1.0}}, Hermiticity::hermitian);
}

}  // namespace qfilter
