#include "flatrack/vehicle_models.hpp"

#include <cmath>
#include <sstream>

#include "flatrack/errors.hpp"

namespace flatrack {

namespace {

void require_speed(double v, double v_min) {
  if (!(std::abs(v) >= v_min)) {
    std::ostringstream msg;
    msg << "velocity too small for flat inversion (|v| = " << std::abs(v) << " < " << v_min << ")";
    throw SingularityError(msg.str());
  }
}

void require_steering(double delta) {
  if (!(std::abs(delta) < std::numbers::pi / 2)) {
    std::ostringstream msg;
    msg << "steering angle |delta| = " << std::abs(delta) << " reaches pi/2";
    throw DomainError(msg.str());
  }
}

void require_horizon(double horizon) {
  if (!(horizon > 0.0)) throw DomainError("prediction horizon T must be positive");
}

void require_flat_shape(const FlatState& f, int k) {
  if (f.m() != 2 || f.k() != k || f.nu.size() != 2)
    throw DimensionError("vehicle flat state must have m=2, k=" + std::to_string(k));
}

double cross(const Eigen::Vector2d& a, const Eigen::Vector2d& b) { return a.x() * b.y() - a.y() * b.x(); }

Eigen::Vector2d heading(double theta) { return {std::cos(theta), std::sin(theta)}; }

}  // namespace

Eigen::Vector2d to_body(double theta, const Eigen::Vector2d& w) {
  const double c = std::cos(theta), s = std::sin(theta);
  return {c * w.x() + s * w.y(), -s * w.x() + c * w.y()};
}

UnicycleState UnicycleState::from_vec(const Eigen::VectorXd& z) {
  if (z.size() != 4) throw DimensionError("unicycle state has 4 entries (px, py, theta, v)");
  return {z(0), z(1), z(2), z(3)};
}

Eigen::Matrix<double, 6, 1> BicycleState::vec() const {
  Eigen::Matrix<double, 6, 1> z;
  z << px, py, theta, v, delta, a;
  return z;
}

BicycleState BicycleState::from_vec(const Eigen::VectorXd& z, double wheelbase_l) {
  if (z.size() != 6) throw DimensionError("bicycle state has 6 entries (px, py, theta, v, delta, a)");
  return {z(0), z(1), z(2), z(3), z(4), z(5), wheelbase_l};
}

// Unicycle ------------------------------------------------------------------

FlatState unicycle_forward(const UnicycleState& s) {
  FlatState f = FlatState::zero(2, 0);
  f.derivatives.col(0) << s.px, s.py;
  f.nu = s.v * heading(s.theta);
  return f;
}

UnicycleState unicycle_from_flat(const FlatState& f, double v_min) {
  require_flat_shape(f, 0);
  const double v = f.nu.norm();
  require_speed(v, v_min);
  return {f.derivatives(0, 0), f.derivatives(1, 0), std::atan2(f.nu.y(), f.nu.x()), v};
}

UnicycleRates unicycle_inverse_rate(const FlatState& f, const Eigen::Vector2d& nu_dot, double v_min) {
  require_flat_shape(f, 0);
  const Eigen::Vector2d nu = f.nu;
  const double speed = nu.norm();
  require_speed(speed, v_min);
  return {nu.dot(nu_dot) / speed, cross(nu, nu_dot) / (speed * speed)};
}

Eigen::Vector2d unicycle_predict(const UnicycleState& s, double horizon) {
  return Eigen::Vector2d(s.px, s.py) + horizon * s.v * heading(s.theta);
}

UnicycleRates unicycle_flat_control(const UnicycleState& s, const Eigen::Vector2d& r_future, double alpha,
                                    double horizon, double v_min) {
  require_speed(s.v, v_min);
  require_horizon(horizon);
  // The -alpha v drift absorbs the T p' part of the prediction error, so the
  // rotated error here is measured from the current position.
  const Eigen::Vector2d body = to_body(s.theta, r_future - Eigen::Vector2d(s.px, s.py));
  const double gain = alpha / horizon;
  return {gain * body.x() - alpha * s.v, gain * body.y() / s.v};
}

UnicycleRates unicycle_direct_nr(const UnicycleState& s, const Eigen::Vector2d& r_future, double alpha,
                                 double horizon, double v_min) {
  require_speed(s.v, v_min);
  require_horizon(horizon);
  // d y_hat / d(theta, v) = T R(theta) [0 1; v 0]
  const Eigen::Vector2d body = to_body(s.theta, r_future - unicycle_predict(s, horizon));
  const double gain = alpha / horizon;
  return {gain * body.x(), gain * body.y() / s.v};
}

Eigen::Vector4d unicycle_dynamics(const UnicycleState& s, const UnicycleRates& u) {
  return {s.v * std::cos(s.theta), s.v * std::sin(s.theta), u.omega, u.v_dot};
}

UnicycleState unicycle_step(const UnicycleState& s, const UnicycleRates& u, double dt) {
  return UnicycleState::from_vec(s.vec() + dt * unicycle_dynamics(s, u));
}

// Bicycle -------------------------------------------------------------------

FlatState bicycle_forward(const BicycleState& s) {
  require_steering(s.delta);
  const Eigen::Vector2d dir = heading(s.theta);
  const Eigen::Vector2d normal(-dir.y(), dir.x());
  FlatState f = FlatState::zero(2, 1);
  f.derivatives.col(0) << s.px, s.py;
  f.derivatives.col(1) = s.v * dir;
  f.nu = s.a * dir + (s.v * s.v / s.wheelbase_l) * std::tan(s.delta) * normal;
  return f;
}

BicycleState bicycle_from_flat(const FlatState& f, double wheelbase_l, double v_min) {
  require_flat_shape(f, 1);
  const Eigen::Vector2d vel = f.derivatives.col(1);
  const double v = vel.norm();
  require_speed(v, v_min);
  const double q = cross(vel, f.nu);
  return {f.derivatives(0, 0), f.derivatives(1, 0), std::atan2(vel.y(), vel.x()), v,
          std::atan(wheelbase_l * q / (v * v * v)), vel.dot(f.nu) / v, wheelbase_l};
}

BicycleInverse bicycle_inverse(const FlatState& f, const Eigen::Vector2d& nu_dot, double wheelbase_l,
                               double v_min) {
  require_flat_shape(f, 1);
  const Eigen::Vector2d vel = f.derivatives.col(1);
  const Eigen::Vector2d acc = f.nu;
  const double v = vel.norm();
  require_speed(v, v_min);
  const double a = vel.dot(acc) / v;
  const double a_dot = (acc.squaredNorm() + vel.dot(nu_dot) - a * a) / v;
  const double q = cross(vel, acc);
  const double q_dot = cross(vel, nu_dot);
  const double v3 = v * v * v;
  const double omega_delta =
      wheelbase_l * v * (q_dot * v * v - 3.0 * q * a * v) / (v3 * v3 + wheelbase_l * wheelbase_l * q * q);
  return {a, a_dot, omega_delta};
}

Eigen::Vector2d bicycle_predict(const BicycleState& s, double horizon) {
  const FlatState f = bicycle_forward(s);
  return f.derivatives.col(0) + horizon * f.derivatives.col(1) + 0.5 * horizon * horizon * f.nu;
}

BicycleRates bicycle_flat_control(const BicycleState& s, const Eigen::Vector2d& r_future, double alpha,
                                  double horizon, double v_min) {
  require_speed(s.v, v_min);
  require_steering(s.delta);
  require_horizon(horizon);
  const double l = s.wheelbase_l;
  const double cd = std::cos(s.delta), sd = std::sin(s.delta), td = std::tan(s.delta);
  const double half_t2 = 0.5 * horizon * horizon;
  const double gain = alpha / half_t2;
  const Eigen::Vector2d body = to_body(s.theta, r_future - Eigen::Vector2d(s.px, s.py));
  const double a_dot =
      gain * (body.x() - (horizon * s.v + half_t2 * s.a)) + s.v * s.v * s.v * td * td / (l * l);
  const double omega_delta =
      gain * (l * cd * cd / (s.v * s.v) * body.y() - half_t2 * sd * cd) - 3.0 * (s.a / s.v) * cd * sd;
  return {a_dot, omega_delta};
}

BicycleRates bicycle_direct_nr(const BicycleState& s, const Eigen::Vector2d& r_future, double alpha,
                               double horizon, double v_min) {
  require_speed(s.v, v_min);
  require_horizon(horizon);
  // d y_hat / d(delta, a) = T^2/2 R(theta) [0 1; v^2/(l cos^2 delta) 0]
  const double cd = std::cos(s.delta);
  const double gain = 2.0 * alpha / (horizon * horizon);
  const Eigen::Vector2d body = to_body(s.theta, r_future - bicycle_predict(s, horizon));
  return {gain * body.x(), gain * s.wheelbase_l * cd * cd / (s.v * s.v) * body.y()};
}

Eigen::Matrix<double, 6, 1> bicycle_dynamics(const BicycleState& s, const BicycleRates& u) {
  Eigen::Matrix<double, 6, 1> dz;
  dz << s.v * std::cos(s.theta), s.v * std::sin(s.theta), s.v / s.wheelbase_l * std::tan(s.delta), s.a,
      u.omega_delta, u.a_dot;
  return dz;
}

BicycleState bicycle_step(const BicycleState& s, const BicycleRates& u, double dt) {
  return BicycleState::from_vec(s.vec() + dt * bicycle_dynamics(s, u), s.wheelbase_l);
}

double principal_steering(double delta) {
  // Map into [-pi/2, pi/2); pi/2 itself lands on -pi/2 and stays singular.
  const double pi = std::numbers::pi;
  return delta - pi * std::floor((delta + pi / 2) / pi);
}

// Type-erased models ----------------------------------------------------------

namespace {

BicycleState wrapped_state(const Eigen::VectorXd& z, double l) {
  BicycleState s = BicycleState::from_vec(z, l);
  s.delta = principal_steering(s.delta);
  return s;
}

}  // namespace

FlatState UnicycleModel::forward(const Eigen::VectorXd& z) const { return unicycle_forward(UnicycleState::from_vec(z)); }

Eigen::VectorXd UnicycleModel::from_flat(const FlatState& f) const { return unicycle_from_flat(f, v_min_).vec(); }

Eigen::Vector2d UnicycleModel::inverse_rate(const FlatState& f, const Eigen::Vector2d& nu_dot) const {
  const UnicycleRates r = unicycle_inverse_rate(f, nu_dot, v_min_);
  return {r.v_dot, r.omega};
}

Eigen::Vector2d UnicycleModel::predict(const Eigen::VectorXd& z, double horizon) const {
  return unicycle_predict(UnicycleState::from_vec(z), horizon);
}

Eigen::Vector2d UnicycleModel::flat_control(const Eigen::VectorXd& z, const Eigen::Vector2d& r_future, double alpha,
                                            double horizon) const {
  const UnicycleRates r = unicycle_flat_control(UnicycleState::from_vec(z), r_future, alpha, horizon, v_min_);
  return {r.v_dot, r.omega};
}

Eigen::Vector2d UnicycleModel::direct_nr(const Eigen::VectorXd& z, const Eigen::Vector2d& r_future, double alpha,
                                         double horizon) const {
  const UnicycleRates r = unicycle_direct_nr(UnicycleState::from_vec(z), r_future, alpha, horizon, v_min_);
  return {r.v_dot, r.omega};
}

Eigen::VectorXd UnicycleModel::dynamics(const Eigen::VectorXd& z, const Eigen::Vector2d& rates) const {
  return unicycle_dynamics(UnicycleState::from_vec(z), {rates(0), rates(1)});
}

BicycleModel::BicycleModel(double wheelbase_l, double v_min, double steer_warn)
    : l_(wheelbase_l), v_min_(v_min), steer_warn_(steer_warn) {
  if (!(wheelbase_l > 0.0) || !std::isfinite(wheelbase_l)) throw DomainError("wheelbase l must be positive");
}

FlatState BicycleModel::forward(const Eigen::VectorXd& z) const {
  return bicycle_forward(wrapped_state(z, l_));
}

Eigen::VectorXd BicycleModel::from_flat(const FlatState& f) const { return bicycle_from_flat(f, l_, v_min_).vec(); }

Eigen::Vector2d BicycleModel::inverse_rate(const FlatState& f, const Eigen::Vector2d& nu_dot) const {
  const BicycleInverse r = bicycle_inverse(f, nu_dot, l_, v_min_);
  return {r.a_dot, r.omega_delta};
}

Eigen::Vector2d BicycleModel::predict(const Eigen::VectorXd& z, double horizon) const {
  return bicycle_predict(wrapped_state(z, l_), horizon);
}

Eigen::Vector2d BicycleModel::flat_control(const Eigen::VectorXd& z, const Eigen::Vector2d& r_future, double alpha,
                                           double horizon) const {
  const BicycleRates r = bicycle_flat_control(wrapped_state(z, l_), r_future, alpha, horizon, v_min_);
  return {r.a_dot, r.omega_delta};
}

Eigen::Vector2d BicycleModel::direct_nr(const Eigen::VectorXd& z, const Eigen::Vector2d& r_future, double alpha,
                                        double horizon) const {
  const BicycleRates r = bicycle_direct_nr(wrapped_state(z, l_), r_future, alpha, horizon, v_min_);
  return {r.a_dot, r.omega_delta};
}

Eigen::VectorXd BicycleModel::dynamics(const Eigen::VectorXd& z, const Eigen::Vector2d& rates) const {
  return bicycle_dynamics(wrapped_state(z, l_), {rates(0), rates(1)});
}

bool BicycleModel::near_singular(const Eigen::VectorXd& z) const {
  return std::abs(principal_steering(z(4))) >= steer_warn_;
}

// Finite-difference checks ------------------------------------------------------

Eigen::VectorXd flat_vector(const FlatState& f) {
  Eigen::VectorXd w(f.derivatives.size() + f.nu.size());
  w << f.stacked(), f.nu;
  return w;
}

FlatState flat_from_vector(const Eigen::VectorXd& w, int k) {
  const int m = static_cast<int>(w.size()) / (k + 2);
  if (m < 1 || w.size() != m * (k + 2)) throw DimensionError("flat vector length must be m(k+2)");
  return FlatState::from_stacked(w.head(m * (k + 1)), w.tail(m), m);
}

namespace {

template <typename F>
Eigen::MatrixXd central_jacobian(F&& f, const Eigen::VectorXd& x, double h) {
  const Eigen::VectorXd f0 = f(x);
  Eigen::MatrixXd jac(f0.size(), x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    Eigen::VectorXd xp = x, xm = x;
    xp(j) += h;
    xm(j) -= h;
    jac.col(j) = (f(xp) - f(xm)) / (2 * h);
  }
  return jac;
}

double relative_max(const Eigen::MatrixXd& residual, const Eigen::MatrixXd& reference) {
  const double scale = std::max(1.0, reference.size() ? reference.cwiseAbs().maxCoeff() : 0.0);
  return (residual.size() ? residual.cwiseAbs().maxCoeff() : 0.0) / scale;
}

/// Reverse z's last two entries into rate order.
Eigen::Vector2d to_rate_order(const Eigen::VectorXd& u_dot) { return {u_dot(1), u_dot(0)}; }

}  // namespace

JacobianReport jacobian_block_check(const FlatVehicleModel& model, const Eigen::VectorXd& z, double horizon,
                                    double h) {
  const int k = model.flat_order();
  const int n = model.state_dim();
  const int stack = 2 * (k + 1);
  if (z.size() != n) throw DimensionError("jacobian_block_check: state has the wrong size");

  auto psi = [&](const Eigen::VectorXd& x) { return flat_vector(model.forward(x)); };
  auto phi = [&](const Eigen::VectorXd& w) { return model.from_flat(flat_from_vector(w, k)); };
  auto g_hat = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd { return model.predict(x, horizon); };

  const Eigen::MatrixXd d_psi = central_jacobian(psi, z, h);
  const Eigen::MatrixXd d_phi = central_jacobian(phi, psi(z), h);
  const Eigen::MatrixXd d_ghat = central_jacobian(g_hat, z, h);

  JacobianReport report;
  const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(n, n);
  report.inverse_residual = relative_max(d_psi * d_phi - identity, identity);
  report.zero_block_residual = relative_max(d_psi.block(0, n - 2, stack, 2), d_psi);

  // The flat predictor is linear in nu with gain T^{k+1}/(k+1)!.
  const double dg_dnu = std::pow(horizon, k + 1) / std::tgamma(k + 2);
  const Eigen::MatrixXd dg_du = d_ghat.rightCols(2);
  const Eigen::MatrixXd dnu_du = d_psi.block(stack, n - 2, 2, 2);
  report.chain_residual = relative_max(dg_du - dg_dnu * dnu_du, dg_du);
  return report;
}

DecompositionReport controller_decomposition_check(const FlatVehicleModel& model, const Eigen::VectorXd& z,
                                                   const Eigen::Vector2d& r_future, double alpha, double horizon,
                                                   double h) {
  const int k = model.flat_order();
  const int stack = 2 * (k + 1);

  DecompositionReport report;
  report.flat_rates = model.flat_control(z, r_future, alpha, horizon);
  report.direct_rates = model.direct_nr(z, r_future, alpha, horizon);

  // Direction of y~ motion: each derivative moves by the next one, nu is held.
  const Eigen::VectorXd w = flat_vector(model.forward(z));
  Eigen::VectorXd dir = Eigen::VectorXd::Zero(w.size());
  dir.head(stack) = w.segment(2, stack);
  auto u_of = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    return model.from_flat(flat_from_vector(x, k)).tail(2);
  };
  report.fd_drift = to_rate_order((u_of(w + h * dir) - u_of(w - h * dir)) / (2 * h));

  const Eigen::Vector2d residual = report.flat_rates - report.direct_rates - report.fd_drift;
  report.residual = relative_max(residual, report.fd_drift);
  return report;
}

}  // namespace flatrack
