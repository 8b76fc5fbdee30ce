#include <doctest.h>

#include <numbers>

#include "cmps/core.hpp"
#include "generators.hpp"
#include "oracles.hpp"

using namespace cmps;

TEST_CASE("rotate_coupling") {
  std::mt19937_64 rng(1);
  const auto p = gen::random_params(rng, Coupling::Direct, 5, false);

  SUBCASE("zero omega leaves R unchanged") {
    auto q = p;
    q.omega.setZero();
    CHECK(rotate_coupling(q, 0.37) == q.R);
  }
  SUBCASE("t = 0 leaves R unchanged") { CHECK(rotate_coupling(p, 0.0) == p.R); }
  SUBCASE("hand-evaluated phases") {
    ModelParameters q;
    q.omega = VectorXd(2);
    q.omega << 0.0, std::numbers::pi;
    q.R = MatrixXcd(2, 2);
    q.R << 0.0, 1.0, 1.0, 0.0;
    const MatrixXcd Rt = rotate_coupling(q, 1.0);
    CHECK(std::abs(Rt(0, 0)) == 0.0);
    CHECK(std::abs(Rt(0, 1) - cplx(-1.0, 0.0)) < 1e-15);
    CHECK(std::abs(Rt(1, 0) - cplx(-1.0, 0.0)) < 1e-15);
  }
  SUBCASE("singular values are preserved") {
    const VectorXd sv = Eigen::JacobiSVD<MatrixXcd>(p.R).singularValues();
    for (double t : {0.1, -3.0, 17.5}) {
      const VectorXd st = Eigen::JacobiSVD<MatrixXcd>(rotate_coupling(p, t)).singularValues();
      CHECK((sv - st).norm() < 1e-10);
    }
  }
}

TEST_CASE("expectation") {
  std::mt19937_64 rng(2);
  const int D = 4;
  VectorXcd psi(D);
  for (int a = 0; a < D; ++a) psi(a) = gen::cnormal(rng);
  const auto pure = LatentState::from_pure(psi);

  CHECK(expectation(pure, MatrixXcd::Identity(D, D)) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(expectation(pure, MatrixXcd::Zero(D, D)) == 0.0);

  VectorXd a(D);
  a << 0.3, -1.2, 2.5, 0.7;
  const auto mixed = LatentState::from_density(MatrixXcd::Identity(D, D) / D);
  CHECK(expectation(mixed, a.cast<cplx>().asDiagonal().toDenseMatrix()) ==
        doctest::Approx(2.0 / D * a.sum()).epsilon(1e-14));

  SUBCASE("unnormalized copy gives the same value") {
    MatrixXcd M(D, D);
    for (Eigen::Index i = 0; i < M.size(); ++i) M.data()[i] = gen::cnormal(rng);
    const LatentState scaled{VectorXcd(psi * 37.0), 0.0};
    CHECK(expectation(scaled, M) == doctest::Approx(expectation(pure, M)).epsilon(1e-12));
    const LatentState rho{MatrixXcd(pure.pure() * pure.pure().adjoint() * 5.0), 0.0};
    CHECK(expectation(rho, M) == doctest::Approx(expectation(pure, M)).epsilon(1e-12));
  }
  SUBCASE("collapsed state raises ZeroNorm") {
    const LatentState zero{VectorXcd(VectorXcd::Zero(D)), 0.0};
    CHECK_THROWS_AS(expectation(zero, MatrixXcd::Identity(D, D)), ZeroNormError);
  }
}

TEST_CASE("evolve_pure") {
  std::mt19937_64 rng(3);
  auto p = gen::random_params(rng, Coupling::Derivative, 6, false);

  SUBCASE("R = 0 is the identity") {
    auto q = p;
    q.R.setZero();
    const auto s0 = initial_state(q, StateKind::Pure);
    const auto s1 = evolve_pure(s0, q, 0.3, 0.01);
    CHECK(s1.pure() == s0.pure());
    CHECK(s1.log_norm == s0.log_norm);
  }
  SUBCASE("output has unit norm") {
    auto s = initial_state(p, StateKind::Pure);
    for (int k = 0; k < 50; ++k) {
      s = evolve_pure(s, p, 0.1 * gen::uniform(rng, -1, 1), k * p.dt);
      CHECK(std::abs(s.pure().norm() - 1.0) < 1e-12);
    }
  }
  SUBCASE("scalar closed form") {
    ModelParameters q;
    q.omega = VectorXd::Zero(1);
    q.R = MatrixXcd::Constant(1, 1, 0.8);
    q.psi0 = VectorXcd::Ones(1);
    q.sigma = 1.3;
    q.dt = 0.01;
    for (double dx : {0.05, -0.3, -2.0}) {
      const double factor = 1.0 - q.sigma * q.sigma * 0.64 * q.dt / 2.0 + 0.8 * dx;
      const auto s = evolve_pure(initial_state(q, StateKind::Pure), q, dx, 0.0);
      CHECK(s.pure()(0).real() == doctest::Approx(factor > 0 ? 1.0 : -1.0));
      CHECK(s.log_norm == doctest::Approx(std::log(std::abs(factor))).epsilon(1e-14));
    }
  }
}

TEST_CASE("evolve_density") {
  std::mt19937_64 rng(4);
  const auto p = gen::random_params(rng, Coupling::Derivative, 16, false);

  SUBCASE("rank-1 density follows the pure state for 512 steps") {
    auto pure = initial_state(p, StateKind::Pure);
    auto dens = LatentState::from_density(pure.pure() * pure.pure().adjoint());
    for (int k = 0; k < 512; ++k) {
      const double dx = p.dt * gen::uniform(rng, -2, 2);
      pure = evolve_pure(pure, p, dx, k * p.dt);
      dens = evolve_density(dens, p, dx, k * p.dt);
      const MatrixXcd outer = pure.pure() * pure.pure().adjoint();
      REQUIRE((dens.density() - outer).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
  SUBCASE("R = 0 leaves rho unchanged") {
    auto q = p;
    q.R.setZero();
    const auto s0 = initial_state(q, StateKind::Density);
    CHECK((evolve_density(s0, q, 0.2, 0.1).density() - s0.density()).cwiseAbs().maxCoeff() < 1e-15);
  }
  SUBCASE("trace one, Hermitian, PSD") {
    auto q = p;
    MatrixXcd W(3, 16);
    for (Eigen::Index i = 0; i < W.size(); ++i) W.data()[i] = gen::cnormal(rng);
    q.W = W;
    auto s = initial_state(q, StateKind::Density);
    for (int k = 0; k < 512; ++k) {
      s = evolve_density(s, q, q.dt * gen::uniform(rng, -2, 2), k * q.dt);
      REQUIRE(std::abs(s.density().trace().real() - 1.0) < 1e-12);
      REQUIRE((s.density() - s.density().adjoint()).cwiseAbs().maxCoeff() < 1e-12);
    }
    const VectorXd ev = Eigen::SelfAdjointEigenSolver<MatrixXcd>(s.density()).eigenvalues();
    CHECK(ev.minCoeff() >= -1e-10);
  }
}

TEST_CASE("init_density") {
  MatrixXcd e0 = MatrixXcd::Zero(1, 5);
  e0(0, 0) = 1.0;
  MatrixXcd expect = MatrixXcd::Zero(5, 5);
  expect(0, 0) = 1.0;
  CHECK(init_density(e0) == expect);
  CHECK((init_density(MatrixXcd::Identity(5, 5)) - MatrixXcd::Identity(5, 5) / 5.0).norm() < 1e-15);
  CHECK_THROWS_AS(init_density(MatrixXcd::Zero(2, 5)), ZeroNormError);

  std::mt19937_64 rng(5);
  MatrixXcd W(3, 5);
  for (Eigen::Index i = 0; i < W.size(); ++i) W.data()[i] = gen::cnormal(rng);
  const VectorXd ev = Eigen::SelfAdjointEigenSolver<MatrixXcd>(init_density(W)).eigenvalues();
  CHECK(ev.minCoeff() >= -1e-12);
  CHECK(ev.sum() == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(ev.head(2).cwiseAbs().maxCoeff() < 1e-12);  // rank <= 3
}

TEST_CASE("run_trajectory") {
  std::mt19937_64 rng(6);
  SUBCASE("R = 0 gives zero expectations") {
    auto p = gen::random_params(rng, Coupling::Direct, 3, false);
    p.R.setZero();
    const std::vector<double> obs{0.3, -1.0, 2.0};
    for (double e : run_trajectory(p, obs, StateKind::Pure)) CHECK(e == 0.0);
  }
  SUBCASE("single observation uses psi0 only") {
    const auto p = gen::random_params(rng, Coupling::Direct, 3, false);
    const std::vector<double> obs{1e6};
    const VectorXcd psi = p.psi0.normalized();
    const double e = 2.0 * psi.dot(p.R * psi).real();
    CHECK(run_trajectory(p, obs, StateKind::Pure)[0] == doctest::Approx(e).epsilon(1e-14));
  }
  SUBCASE("matches the naive oracle in both couplings and states") {
    for (int i = 0; i < 20; ++i) {
      const auto coupling = i % 2 ? Coupling::Direct : Coupling::Derivative;
      const auto kind = i % 4 < 2 ? StateKind::Pure : StateKind::Density;
      const auto p = gen::random_params(rng, coupling, 2 + i % 5, kind == StateKind::Density && i % 3 == 0);
      const auto signal = gen::random_signal(rng, p, 9);
      std::vector<double> obs;
      for (std::size_t k = 0; k + 1 < signal.size(); ++k)
        obs.push_back(coupling == Coupling::Direct ? signal[k + 1] : signal[k + 1] - signal[k]);
      const auto got = run_trajectory(p, obs, kind);
      const auto ref = oracle::expectations(p, signal, kind);
      REQUIRE(got.size() == ref.size());
      for (std::size_t k = 0; k < got.size(); ++k) CHECK(std::abs(got[k] - static_cast<double>(ref[k])) < 1e-12);
    }
  }
  SUBCASE("fast kernel agrees with the explicit step operator") {
    const auto p = gen::random_params(rng, Coupling::Derivative, 7, false);
    auto s = initial_state(p, StateKind::Pure);
    std::vector<double> obs(300);
    for (double& y : obs) y = p.dt * gen::uniform(rng, -1, 1);
    const auto fast = run_trajectory(p, obs, StateKind::Pure);
    for (std::size_t k = 0; k < obs.size(); ++k) {
      CHECK(std::abs(expectation(s, rotate_coupling(p, k * p.dt)) - fast[k]) < 1e-12);
      s = evolve_pure(s, p, obs[k], k * p.dt);
    }
  }
  SUBCASE("unnormalized evolution gives the same expectations over 512 steps") {
    const auto p = gen::random_params(rng, Coupling::Derivative, 6, false);
    std::vector<double> obs(512);
    for (double& y : obs) y = p.dt * gen::uniform(rng, -1, 1);
    const auto e = run_trajectory(p, obs, StateKind::Pure);
    VectorXcd psi = p.psi0;
    double worst = 0.0;
    for (std::size_t k = 0; k < obs.size(); ++k) {
      const MatrixXcd Rt = rotate_coupling(p, k * p.dt);
      worst = std::max(worst, std::abs(2.0 * psi.dot(Rt * psi).real() / psi.squaredNorm() - e[k]));
      psi = step_operator(p, obs[k], k * p.dt) * psi;
    }
    CHECK(worst < 1e-10);
  }
  SUBCASE("collapse reports the failing step") {
    ModelParameters q;
    q.omega = VectorXd::Zero(1);
    q.R = MatrixXcd::Constant(1, 1, 1.0);
    q.psi0 = VectorXcd::Ones(1);
    q.coupling = Coupling::Derivative;
    q.sigma = 1e-3;
    // 1 - sigma^2 dt / 2 + dx = 0 up to roundoff, well under the raised floor.
    const double kill = -(1.0 - 0.5 * q.sigma * q.sigma * q.dt);
    const std::vector<double> obs{0.0, 0.0, kill, 0.0};
    try {
      run_trajectory(q, obs, StateKind::Pure, 1e-12);
      FAIL("expected ZeroNormError");
    } catch (const ZeroNormError& e) {
      CHECK(e.step() == 3);
    }
  }
}

TEST_CASE("parameter validation") {
  std::mt19937_64 rng(7);
  auto p = gen::random_params(rng, Coupling::Direct, 3, false);
  CHECK_NOTHROW(p.validate());
  auto q = p;
  q.dt = 0.0;
  CHECK_THROWS_AS(q.validate(), ConfigError);
  q = p;
  q.psi0.setZero();
  CHECK_THROWS_AS(q.validate(), ConfigError);
  q = p;
  q.W = MatrixXcd::Ones(4, 3);
  CHECK_THROWS_AS(q.validate(), ConfigError);
  q = p;
  q.zero_R_diagonal = true;
  q.R(1, 1) = 1.0;
  CHECK_THROWS_AS(q.validate(), ConfigError);
  q.enforce_constraints();
  CHECK_NOTHROW(q.validate());
}
