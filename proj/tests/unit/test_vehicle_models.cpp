#include <doctest.h>

#include <cmath>
#include <numbers>

#include "flatrack/errors.hpp"
#include "flatrack/vehicle_models.hpp"
#include "generators.hpp"

using namespace flatrack;
using flatrack::testing::Gen;

namespace {

constexpr double kPi = std::numbers::pi;

UnicycleState random_unicycle(Gen& g) {
  return {g.uniform(-20, 20), g.uniform(-20, 20), g.uniform(-kPi, kPi), g.uniform(0.5, 5)};
}

BicycleState random_bicycle(Gen& g, double l = 2.0) {
  return {g.uniform(-20, 20), g.uniform(-20, 20), g.uniform(-kPi, kPi), g.uniform(0.5, 5),
          g.uniform(-1.2, 1.2), g.uniform(-2, 2),   l};
}

double rel(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace

TEST_SUITE("vehicle_models") {
  TEST_CASE("unicycle_forward examples") {
    FlatState f = unicycle_forward({0, 0, 0, 1});
    CHECK(f.y().isZero());
    CHECK((f.nu - Eigen::Vector2d(1, 0)).norm() < 1e-15);

    f = unicycle_forward({12, -4, kPi / 2, 1});
    CHECK(f.y() == Eigen::Vector2d(12, -4));
    CHECK((f.nu - Eigen::Vector2d(0, 1)).norm() < 1e-15);

    f = unicycle_forward({0, 0, kPi / 4, std::sqrt(2.0)});
    CHECK((f.nu - Eigen::Vector2d(1, 1)).norm() < 1e-15);
  }

  TEST_CASE("unicycle_inverse_rate examples") {
    FlatState f = unicycle_forward({0, 0, 0, 1});
    UnicycleRates r = unicycle_inverse_rate(f, Eigen::Vector2d(0, 1));
    CHECK(r.v_dot == doctest::Approx(0.0));
    CHECK(r.omega == doctest::Approx(1.0));
    r = unicycle_inverse_rate(f, Eigen::Vector2d::Zero());
    CHECK(r.v_dot == 0.0);
    CHECK(r.omega == 0.0);
    f.nu = Eigen::Vector2d(0, 0.5 * kVMin);
    CHECK_THROWS_AS(unicycle_inverse_rate(f, Eigen::Vector2d::Zero()), SingularityError);
  }

  TEST_CASE("unicycle_flat_control examples") {
    const double alpha = 100, t = 0.02;
    // r(t+T) = p gives a zero error vector in the fused law.
    const UnicycleState s{3, 4, 0.3, 1.0};
    UnicycleRates u = unicycle_flat_control(s, Eigen::Vector2d(3, 4), alpha, t);
    CHECK(u.v_dot == doctest::Approx(-alpha));
    CHECK(u.omega == doctest::Approx(0.0));

    const double c = 7.0;
    u = unicycle_flat_control({0, 0, 0, 1}, Eigen::Vector2d(t / alpha * c, 0), alpha, t);
    CHECK(u.v_dot == doctest::Approx(c - alpha));
    CHECK(u.omega == doctest::Approx(0.0));

    CHECK_THROWS_AS(unicycle_flat_control({0, 0, 0, 0}, Eigen::Vector2d(1, 1), alpha, t), SingularityError);
  }

  TEST_CASE("unicycle fused law equals the composition path") {
    Gen g(31);
    for (int i = 0; i < 100; ++i) {
      const UnicycleState s = random_unicycle(g);
      const Eigen::Vector2d r = Eigen::Vector2d(s.px, s.py) + g.vector(2, -5, 5);
      const double alpha = g.uniform(2, 100), t = g.uniform(0.02, 1.0);
      const FlatState f = unicycle_forward(s);
      const UnicycleRates composed = unicycle_inverse_rate(f, nr_flat_rate(f, r, {2, 0, t, alpha}));
      const UnicycleRates fused = unicycle_flat_control(s, r, alpha, t);
      const double scale = std::max({1.0, std::abs(fused.v_dot), std::abs(fused.omega)});
      CHECK(std::abs(composed.v_dot - fused.v_dot) / scale < 1e-9);
      CHECK(std::abs(composed.omega - fused.omega) / scale < 1e-9);
    }
  }

  TEST_CASE("unicycle_direct_nr examples") {
    const UnicycleState s{0, 0, 0, 1};
    const double t = 0.02, alpha = 100;
    const Eigen::Vector2d r = unicycle_predict(s, t) + Eigen::Vector2d(1, 1);
    const UnicycleRates u = unicycle_direct_nr(s, r, alpha, t);
    CHECK(u.v_dot == doctest::Approx(alpha / t));
    CHECK(u.omega == doctest::Approx(alpha / t));

    const UnicycleRates zero = unicycle_direct_nr(s, unicycle_predict(s, t), alpha, t);
    CHECK(zero.v_dot == 0.0);
    CHECK(zero.omega == 0.0);
  }

  TEST_CASE("unicycle: direct NR equals the flat law (zero drift)") {
    Gen g(32);
    UnicycleModel model;
    for (int i = 0; i < 100; ++i) {
      const UnicycleState s = random_unicycle(g);
      const Eigen::Vector2d r = Eigen::Vector2d(s.px, s.py) + g.vector(2, -5, 5);
      const DecompositionReport rep = controller_decomposition_check(model, s.vec(), r, 100, 0.02);
      const double scale = std::max(1.0, rep.flat_rates.cwiseAbs().maxCoeff());
      CHECK((rep.flat_rates - rep.direct_rates).cwiseAbs().maxCoeff() / scale < 1e-9);
      CHECK(rep.fd_drift.cwiseAbs().maxCoeff() < 1e-6);
    }
  }

  TEST_CASE("bicycle_forward examples") {
    Gen g(33);
    for (int i = 0; i < 5; ++i) {
      const FlatState f = bicycle_forward({0, 0, g.uniform(-3, 3), g.uniform(0.5, 3), 0, 0, 2});
      CHECK(f.nu.norm() < 1e-15);
    }
    FlatState f = bicycle_forward({0, 0, 0, 2, 0, 1, 2});
    CHECK((f.nu - Eigen::Vector2d(1, 0)).norm() < 1e-15);
    f = bicycle_forward({0, 0, 0, 1, kPi / 4, 0, 2});
    CHECK((f.nu - Eigen::Vector2d(0, 0.5)).norm() < 1e-15);
    CHECK_THROWS_AS(bicycle_forward({0, 0, 0, 1, kPi / 2, 0, 2}), DomainError);
    CHECK_THROWS_AS(bicycle_forward({0, 0, 0, 1, -2.0, 0, 2}), DomainError);
  }

  TEST_CASE("bicycle_inverse examples") {
    FlatState f = FlatState::zero(2, 1);
    f.derivatives.col(1) << 1, 0;
    BicycleInverse inv = bicycle_inverse(f, Eigen::Vector2d::Zero(), 2.0);
    CHECK(inv.a == 0.0);
    CHECK(inv.omega_delta == 0.0);

    f.nu << 1, 0;
    inv = bicycle_inverse(f, Eigen::Vector2d::Zero(), 2.0);
    CHECK(inv.a == doctest::Approx(1.0));
    CHECK(inv.omega_delta == doctest::Approx(0.0));

    f.nu << 0, 1;
    inv = bicycle_inverse(f, Eigen::Vector2d::Zero(), 2.0);
    CHECK(inv.a == doctest::Approx(0.0));
    CHECK(inv.omega_delta == doctest::Approx(0.0));

    f.derivatives.col(1) << 0, 0.5 * kVMin;
    CHECK_THROWS_AS(bicycle_inverse(f, Eigen::Vector2d::Zero(), 2.0), SingularityError);
  }

  TEST_CASE("bicycle_flat_control examples") {
    const double alpha = 30, t = 0.8, v = 1.5;
    // Straight line with r(t+T) exactly T v ahead: equilibrium.
    const BicycleState s{1, 2, 0.4, v, 0, 0, 2};
    const Eigen::Vector2d ahead = Eigen::Vector2d(1, 2) + t * v * Eigen::Vector2d(std::cos(0.4), std::sin(0.4));
    const BicycleRates u = bicycle_flat_control(s, ahead, alpha, t);
    CHECK(std::abs(u.a_dot) < 1e-12);
    CHECK(std::abs(u.omega_delta) < 1e-12);
    CHECK_THROWS_AS(bicycle_flat_control({0, 0, 0, 0, 0, 0, 2}, ahead, alpha, t), SingularityError);
  }

  TEST_CASE("bicycle fused law equals the composition path") {
    Gen g(34);
    for (int i = 0; i < 100; ++i) {
      const BicycleState s = random_bicycle(g, g.uniform(1, 4));
      const Eigen::Vector2d r = Eigen::Vector2d(s.px, s.py) + g.vector(2, -5, 5);
      const double alpha = g.uniform(2, 50), t = g.uniform(0.1, 1.5);
      const FlatState f = bicycle_forward(s);
      const BicycleInverse composed = bicycle_inverse(f, nr_flat_rate(f, r, {2, 1, t, alpha}), s.wheelbase_l);
      const BicycleRates fused = bicycle_flat_control(s, r, alpha, t);
      CHECK(rel(composed.a_dot, fused.a_dot) < 1e-8);
      CHECK(rel(composed.omega_delta, fused.omega_delta) < 1e-8);
      CHECK(rel(composed.a, s.a) < 1e-9);
    }
  }

  TEST_CASE("bicycle: flat law = direct NR + finite-difference drift") {
    Gen g(35);
    BicycleModel model(2.0);
    for (int i = 0; i < 100; ++i) {
      const BicycleState s = random_bicycle(g);
      const Eigen::Vector2d r = Eigen::Vector2d(s.px, s.py) + g.vector(2, -5, 5);
      const DecompositionReport rep = controller_decomposition_check(model, s.vec(), r, 30, 0.8);
      CHECK(rep.residual < 1e-4);
      // Analytic drift: [v^3 tan^2 delta / l^2; -3 (a/v) cos delta sin delta].
      const double td = std::tan(s.delta);
      const Eigen::Vector2d drift(s.v * s.v * s.v * td * td / 4.0,
                                  -3 * s.a / s.v * std::cos(s.delta) * std::sin(s.delta));
      CHECK((rep.flat_rates - rep.direct_rates - drift).cwiseAbs().maxCoeff() /
                std::max(1.0, drift.cwiseAbs().maxCoeff()) <
            1e-9);
    }
  }

  TEST_CASE("round trips through the flat coordinates") {
    Gen g(36);
    for (int i = 0; i < 100; ++i) {
      const UnicycleState u = random_unicycle(g);
      const UnicycleState ub = unicycle_from_flat(unicycle_forward(u));
      CHECK(std::abs(std::remainder(ub.theta - u.theta, 2 * kPi)) < 1e-9);
      CHECK(rel(ub.v, u.v) < 1e-9);

      const BicycleState b = random_bicycle(g);
      const BicycleState bb = bicycle_from_flat(bicycle_forward(b), b.wheelbase_l);
      CHECK(std::abs(std::remainder(bb.theta - b.theta, 2 * kPi)) < 1e-9);
      CHECK(rel(bb.v, b.v) < 1e-9);
      CHECK(rel(bb.delta, b.delta) < 1e-9);
      CHECK(rel(bb.a, b.a) < 1e-9);
    }
  }

  TEST_CASE("jacobian_block_check examples") {
    UnicycleModel uni;
    JacobianReport rep = jacobian_block_check(uni, UnicycleState{0, 0, 0, 1}.vec());
    CHECK(rep.inverse_residual < 1e-5);
    CHECK(rep.zero_block_residual < 1e-5);
    CHECK(rep.chain_residual < 1e-5);

    BicycleModel bi(2.0);
    rep = jacobian_block_check(bi, BicycleState{0, 0, 0, 1, 0.1, 0, 2}.vec());
    CHECK(rep.inverse_residual < 1e-5);
    CHECK(rep.zero_block_residual < 1e-5);
    CHECK(rep.chain_residual < 1e-5);
  }

  TEST_CASE("unicycle Jacobians match the analytic blocks") {
    // Psi(z) = (px, py, v cos th, v sin th); dPsi/dz is known in closed form.
    UnicycleModel uni;
    const UnicycleState s{1, 2, 0.7, 1.3};
    Eigen::Matrix4d exact = Eigen::Matrix4d::Zero();
    exact(0, 0) = exact(1, 1) = 1;
    exact(2, 2) = -s.v * std::sin(s.theta);
    exact(2, 3) = std::cos(s.theta);
    exact(3, 2) = s.v * std::cos(s.theta);
    exact(3, 3) = std::sin(s.theta);
    const double h = 1e-6;
    Eigen::Matrix4d fd;
    for (int j = 0; j < 4; ++j) {
      Eigen::VectorXd zp = s.vec(), zm = s.vec();
      zp(j) += h;
      zm(j) -= h;
      fd.col(j) = (flat_vector(uni.forward(zp)) - flat_vector(uni.forward(zm))) / (2 * h);
    }
    CHECK((fd - exact).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(jacobian_block_check(uni, s.vec()).passed());
  }

  TEST_CASE("random states pass the block checks") {
    Gen g(37);
    UnicycleModel uni;
    BicycleModel bi(2.0);
    for (int i = 0; i < 50; ++i) {
      CHECK(jacobian_block_check(uni, random_unicycle(g).vec(), 0.02).passed());
      CHECK(jacobian_block_check(bi, random_bicycle(g).vec(), 0.8).passed());
    }
  }

  TEST_CASE("bicycle flat chain is consistent along a trajectory") {
    // d/dt of (y, y') along the Euler-integrated state matches (y', nu) to O(dt).
    BicycleState s{0, 0, 0.3, 2.0, 0.2, 0.5, 2.0};
    const BicycleRates u{0.3, -0.4};
    for (double dt : {1e-3, 1e-4}) {
      BicycleState x = s;
      double worst = 0.0;
      for (int i = 0; i < 100; ++i) {
        const FlatState f0 = bicycle_forward(x);
        const BicycleState next = bicycle_step(x, u, dt);
        const FlatState f1 = bicycle_forward(next);
        const Eigen::MatrixXd d = (f1.derivatives - f0.derivatives) / dt;
        worst = std::max(worst, (d.col(0) - f0.derivatives.col(1)).cwiseAbs().maxCoeff());
        worst = std::max(worst, (d.col(1) - f0.nu).cwiseAbs().maxCoeff());
        x = next;
      }
      CHECK(worst < 20 * dt);
    }
  }

  TEST_CASE("steering wraps by pi inside the type-erased bicycle") {
    CHECK(principal_steering(0.3) == doctest::Approx(0.3));
    CHECK(principal_steering(0.3 + kPi) == doctest::Approx(0.3));
    CHECK(principal_steering(-0.3 - 2 * kPi) == doctest::Approx(-0.3));
    CHECK(principal_steering(kPi / 2) == doctest::Approx(-kPi / 2));

    BicycleModel bi(2.0);
    BicycleState s{1, 2, 0.3, 1.5, 0.4, 0.2, 2.0};
    BicycleState shifted = s;
    shifted.delta += kPi;
    const Eigen::Vector2d r(4, 5);
    CHECK((bi.flat_control(s.vec(), r, 30, 0.8) - bi.flat_control(shifted.vec(), r, 30, 0.8)).norm() < 1e-9);
    CHECK((bi.dynamics(s.vec(), {1, 1}) - bi.dynamics(shifted.vec(), {1, 1})).norm() < 1e-12);
    BicycleState edge = s;
    edge.delta = kPi / 2;
    CHECK_THROWS_AS(bi.flat_control(edge.vec(), r, 30, 0.8), DomainError);
    CHECK(bi.near_singular(BicycleState{0, 0, 0, 1, kSteeringWarnAngle + 0.01, 0, 2}.vec()));
    CHECK_FALSE(bi.near_singular(s.vec()));
  }
}
