#include <doctest.h>

#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>

#include "helpers.hpp"
#include "qfilter/model.hpp"

using namespace qfilter;

namespace {

double max_abs(const CMatrix& m) { return m.cwiseAbs().maxCoeff(); }

double harmonic_ground_energy(std::size_t n) {
  const Grid g{-10.0, 10.0, n};
  const auto model = build_grid_model(g, GridPotential::harmonic(g, 1.0, 1.0), 1.0, 0.0);
  Eigen::SelfAdjointEigenSolver<CMatrix> es(model.hamiltonian.to_dense(), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

void check_decomposition(const ModelSpec& m) {
  const CMatrix K = m.K.to_dense();
  CMatrix LL = CMatrix::Zero(K.rows(), K.cols());
  for (const auto& L : m.channels) LL += L.to_dense().adjoint() * L.to_dense();
  CHECK(max_abs(K + K.adjoint() - LL) <= 1e-12);
  CHECK(max_abs(K - K.adjoint() - (2.0 * kI / m.hbar) * m.hamiltonian.to_dense()) <= 1e-12);
}

}  // namespace

TEST_SUITE("model") {
  TEST_CASE("qubit: h = 0, sigma_z, lambda = 1 gives L = sqrt2 sigma_z and K = I") {
    const auto m = build_qubit_model({0.0, 0.0, 0.0}, 1.0);
    REQUIRE(m.n_channels() == 1);
    CHECK(max_abs(m.channels[0].to_dense() - std::sqrt(2.0) * sigma_z().to_dense()) < 1e-15);
    CHECK(max_abs(m.K.to_dense() - CMatrix::Identity(2, 2)) < 1e-15);
  }

  TEST_CASE("qubit: h = (1,0,0), lambda = 0 gives L = 0 and K = i sigma_x / 2") {
    const auto m = build_qubit_model({1.0, 0.0, 0.0}, 0.0);
    REQUIRE(m.n_channels() == 1);
    CHECK(m.channels[0].is_zero());
    CHECK(max_abs(m.K.to_dense() - 0.5 * kI * sigma_x().to_dense()) < 1e-15);
  }

  TEST_CASE("qubit: h = (0,0,1), lambda = 0.5 gives K = I/2 + i sigma_z / 2") {
    const auto m = build_qubit_model({0.0, 0.0, 1.0}, 0.5);
    // L = sqrt(2 * 0.5) sigma_z = sigma_z, L^dag L / 2 = I / 2, i H = i sigma_z / 2.
    CMatrix expected(2, 2);
    expected << Complex(0.5, 0.5), 0.0, 0.0, Complex(0.5, -0.5);
    CHECK(max_abs(m.K.to_dense() - expected) < 1e-15);
  }

  TEST_CASE("qubit: hbar scales the Hamiltonian and K") {
    const auto m = build_qubit_model({0.3, -0.2, 0.7}, 0.4, sigma_x(), 2.5);
    CHECK(max_abs(m.hamiltonian.to_dense() - 1.25 * (0.3 * sigma_x().to_dense() - 0.2 * sigma_y().to_dense() +
                                                     0.7 * sigma_z().to_dense())) < 1e-14);
    check_decomposition(m);
  }

  TEST_CASE("negative lambda is a validation error") {
    CHECK_THROWS_AS(build_qubit_model({1.0, 0.0, 0.0}, -1.0), ValidationError);
    const Grid g{-5.0, 5.0, 32};
    CHECK_THROWS_AS(build_grid_model(g, GridPotential::free(g), 1.0, -0.1), ValidationError);
  }

  TEST_CASE("grid model input validation") {
    const Grid small{-1.0, 1.0, 4};
    CHECK_THROWS_AS(build_grid_model(small, GridPotential::free(small), 1.0, 0.0), ValidationError);
    const Grid g{-1.0, 1.0, 16};
    CHECK_THROWS_AS(build_grid_model(g, GridPotential::free(g), 0.0, 0.0), ValidationError);
    CHECK_THROWS_AS(build_grid_model(g, GridPotential::free(g), 1.0, 0.0, -1.0), ValidationError);
    std::vector<double> bad(16, 0.0);
    bad[3] = std::nan("");
    CHECK_THROWS_AS(GridPotential::table(g, bad), ValidationError);
    CHECK_THROWS_AS(GridPotential::table(g, std::vector<double>(5, 0.0)), ValidationError);
  }

  TEST_CASE("free Laplacian annihilates constants away from the walls") {
    const Grid g{-4.0, 4.0, 40};
    const auto m = build_grid_model(g, GridPotential::free(g), 1.0, 0.0);
    const CVector ones = CVector::Ones(40);
    const CVector r = m.hamiltonian.apply(ones);
    for (Eigen::Index i = 1; i + 1 < r.size(); ++i) CHECK(std::abs(r(i)) < 1e-12);
    CHECK(std::abs(r(0)) > 1.0);
    CHECK(std::abs(r(39)) > 1.0);
  }

  TEST_CASE("harmonic ground-state energy from dense diagonalization") {
    CHECK(std::abs(harmonic_ground_energy(256) - 0.5) <= 0.01);
  }

  TEST_CASE("property: harmonic ground energy error is second order in dx") {
    const double e1 = std::abs(harmonic_ground_energy(128) - 0.5);
    const double e2 = std::abs(harmonic_ground_energy(256) - 0.5);
    const double ratio = e1 / e2;
    CHECK(ratio >= 3.5);
    CHECK(ratio <= 4.5);
  }

  TEST_CASE("grid lambda = 0: one zero channel and K = i H") {
    const Grid g{-5.0, 5.0, 64};
    const auto m = build_grid_model(g, GridPotential::barrier(g, 2.0, 1.0), 1.0, 0.0);
    REQUIRE(m.n_channels() == 1);
    CHECK(m.channels[0].is_zero());
    CHECK(max_abs(m.K.to_dense() - kI * m.hamiltonian.to_dense()) < 1e-15);
  }

  TEST_CASE("grid channel is sqrt(2 lambda) x and the Hamiltonian is hermitian") {
    const Grid g{-6.0, 3.0, 50};
    const auto m = build_grid_model(g, GridPotential::harmonic(g, 1.3, 0.8), 0.8, 0.7, 1.1);
    const CVector d = m.channels[0].diag();
    for (std::size_t i = 0; i < g.n_points; ++i) CHECK(std::abs(d(Eigen::Index(i)) - std::sqrt(1.4) * g.x(i)) < 1e-14);
    CHECK(m.hamiltonian.hermitian_defect() <= 1e-12);
    CHECK(m.hamiltonian.structure() == Structure::tridiagonal);
    check_decomposition(m);
    CHECK_NOTHROW(m.validate());
  }

  TEST_CASE("assemble_K examples") {
    const Basis b = Basis::finite(2);
    const auto H0 = Operator::dense(b, CMatrix::Zero(2, 2), Hermiticity::hermitian);
    const auto K1 = assemble_K(H0, {std::sqrt(2.0) * sigma_z()}, 1.0);
    CHECK(max_abs(K1.to_dense() - CMatrix::Identity(2, 2)) < 1e-15);
    const auto K2 = assemble_K(sigma_x(), {Operator::zero(b)}, 1.0);
    CHECK(max_abs(K2.to_dense() - kI * sigma_x().to_dense()) < 1e-15);
    CHECK_THROWS_AS(assemble_K(sigma_x(), {Operator::zero(Basis::finite(3))}, 1.0), DimensionError);
  }

  TEST_CASE("property: hermitian part of K is positive semidefinite for random models") {
    std::mt19937_64 rng(21);
    const Basis b = Basis::finite(4);
    for (int k = 0; k < 20; ++k) {
      const auto H = Operator::dense(b, testing::random_hermitian(rng, 4), Hermiticity::hermitian);
      CMatrix l(4, 4);
      for (Eigen::Index i = 0; i < 4; ++i) l.row(i) = testing::random_vector(rng, 4).transpose();
      const auto m = build_model(H, {Operator::dense(b, l), Operator::dense(b, l.adjoint() * 0.5)}, 1.0, 0.9);
      const CMatrix K = m.K.to_dense();
      Eigen::SelfAdjointEigenSolver<CMatrix> es((K + K.adjoint()) / 2.0, Eigen::EigenvaluesOnly);
      CHECK(es.eigenvalues().minCoeff() >= -1e-12);
      check_decomposition(m);
    }
  }

  TEST_CASE("build_model rejects a non-hermitian Hamiltonian") {
    const Basis b = Basis::finite(2);
    CMatrix m(2, 2);
    m << 0.0, 1.0, 0.0, 0.0;
    CHECK_THROWS(build_model(Operator::dense(b, m), {}, 0.0));
  }

  TEST_CASE("gaussian packet moments") {
    const Grid g{-20.0, 20.0, 1024};
    const Basis b = Basis::grid(g);
    const auto psi = gaussian_packet(b, -1.0, 2.0, 1.5);
    CHECK(psi.is_normalized(1e-12));
    const double mx = expectation(psi, position_operator(b)).real();
    CHECK(mx == doctest::Approx(-1.0).epsilon(1e-9));
    CHECK(expectation(psi, position_squared_operator(b)).real() - mx * mx == doctest::Approx(2.25).epsilon(1e-9));
    // Central difference: <p> = sin(p0 dx) / dx for a slowly varying envelope.
    CHECK(expectation(psi, momentum_operator(b, 1.0)).real() ==
          doctest::Approx(std::sin(2.0 * g.dx()) / g.dx()).epsilon(1e-3));
  }
}
