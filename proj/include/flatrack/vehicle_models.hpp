#pragma once

#include <Eigen/Core>

#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include "flatrack/trivial_flat.hpp"

namespace flatrack {

/// Below this speed the flat inversion is refused.
inline constexpr double kVMin = 1e-3;
/// Steering angles beyond this are reported as near-singular (tan delta blows up at pi/2).
inline constexpr double kSteeringWarnAngle = std::numbers::pi / 2 - 0.05;

// ---------------------------------------------------------------------------
// Kinematic unicycle, extended with v as a state: z = (px, py, theta, v).

struct UnicycleState {
  double px = 0.0;
  double py = 0.0;
  double theta = 0.0;
  double v = 1.0;

  Eigen::Vector4d vec() const { return {px, py, theta, v}; }
  static UnicycleState from_vec(const Eigen::VectorXd& z);
};

struct UnicycleRates {
  double v_dot = 0.0;
  double omega = 0.0;
};

// ---------------------------------------------------------------------------
// Dynamic bicycle, extended with a as a state: z = (px, py, theta, v, delta, a).

struct BicycleState {
  double px = 0.0;
  double py = 0.0;
  double theta = 0.0;
  double v = 1.0;
  double delta = 0.0;
  double a = 0.0;
  double wheelbase_l = 2.0;

  Eigen::Matrix<double, 6, 1> vec() const;
  static BicycleState from_vec(const Eigen::VectorXd& z, double wheelbase_l);
};

struct BicycleRates {
  double a_dot = 0.0;
  double omega_delta = 0.0;
};

struct BicycleInverse {
  double a = 0.0;
  double a_dot = 0.0;
  double omega_delta = 0.0;
};

/// The bicycle sees delta only through tan, cos^2 and sin*cos, all pi-periodic:
/// the representative of delta in [-pi/2, pi/2).
double principal_steering(double delta);

/// World vector expressed in the heading frame.
Eigen::Vector2d to_body(double theta, const Eigen::Vector2d& w);

// Unicycle ------------------------------------------------------------------

FlatState unicycle_forward(const UnicycleState& s);
UnicycleState unicycle_from_flat(const FlatState& f, double v_min = kVMin);
UnicycleRates unicycle_inverse_rate(const FlatState& f, const Eigen::Vector2d& nu_dot, double v_min = kVMin);
/// p + T v (cos theta, sin theta)
Eigen::Vector2d unicycle_predict(const UnicycleState& s, double horizon);
/// Fused flat-coordinates law. Equals unicycle_inverse_rate(nr_flat_rate(...)).
UnicycleRates unicycle_flat_control(const UnicycleState& s, const Eigen::Vector2d& r_future, double alpha,
                                    double horizon, double v_min = kVMin);
/// alpha (dy_hat/d(theta, v))^{-1} (r(t+T) - y_hat(t+T)) on the physical state.
UnicycleRates unicycle_direct_nr(const UnicycleState& s, const Eigen::Vector2d& r_future, double alpha,
                                 double horizon, double v_min = kVMin);
Eigen::Vector4d unicycle_dynamics(const UnicycleState& s, const UnicycleRates& u);
UnicycleState unicycle_step(const UnicycleState& s, const UnicycleRates& u, double dt);

// Bicycle -------------------------------------------------------------------

/// y = p, y' = p', nu = p''. Throws DomainError when |delta| >= pi/2.
FlatState bicycle_forward(const BicycleState& s);
BicycleState bicycle_from_flat(const FlatState& f, double wheelbase_l, double v_min = kVMin);
BicycleInverse bicycle_inverse(const FlatState& f, const Eigen::Vector2d& nu_dot, double wheelbase_l,
                               double v_min = kVMin);
/// p + T p' + T^2/2 p''
Eigen::Vector2d bicycle_predict(const BicycleState& s, double horizon);
BicycleRates bicycle_flat_control(const BicycleState& s, const Eigen::Vector2d& r_future, double alpha,
                                  double horizon, double v_min = kVMin);
BicycleRates bicycle_direct_nr(const BicycleState& s, const Eigen::Vector2d& r_future, double alpha,
                               double horizon, double v_min = kVMin);
Eigen::Matrix<double, 6, 1> bicycle_dynamics(const BicycleState& s, const BicycleRates& u);
BicycleState bicycle_step(const BicycleState& s, const BicycleRates& u, double dt);

// ---------------------------------------------------------------------------
// Type-erased view used by the simulator and the Jacobian checks. The state
// vector z ends with the two extended inputs u; rates are ordered
// (d/dt z[n-1], d/dt z[n-2]), i.e. (v_dot, omega) and (a_dot, omega_delta).

class FlatVehicleModel {
 public:
  virtual ~FlatVehicleModel() = default;

  virtual std::string name() const = 0;
  /// Flat-output derivative order k: nu = y^(k+1).
  virtual int flat_order() const = 0;
  virtual std::vector<std::string> state_names() const = 0;
  virtual std::vector<std::string> rate_names() const = 0;
  int state_dim() const { return static_cast<int>(state_names().size()); }

  virtual FlatState forward(const Eigen::VectorXd& z) const = 0;    ///< Psi
  virtual Eigen::VectorXd from_flat(const FlatState& f) const = 0;  ///< Phi
  virtual Eigen::Vector2d inverse_rate(const FlatState& f, const Eigen::Vector2d& nu_dot) const = 0;
  virtual Eigen::Vector2d predict(const Eigen::VectorXd& z, double horizon) const = 0;
  virtual Eigen::Vector2d flat_control(const Eigen::VectorXd& z, const Eigen::Vector2d& r_future, double alpha,
                                       double horizon) const = 0;
  virtual Eigen::Vector2d direct_nr(const Eigen::VectorXd& z, const Eigen::Vector2d& r_future, double alpha,
                                    double horizon) const = 0;
  virtual Eigen::VectorXd dynamics(const Eigen::VectorXd& z, const Eigen::Vector2d& rates) const = 0;
  /// Steering-type near-singularity that does not stop the controller (bicycle only).
  virtual bool near_singular(const Eigen::VectorXd&) const { return false; }
};

class UnicycleModel final : public FlatVehicleModel {
 public:
  explicit UnicycleModel(double v_min = kVMin) : v_min_(v_min) {}

  std::string name() const override { return "unicycle"; }
  int flat_order() const override { return 0; }
  std::vector<std::string> state_names() const override { return {"px", "py", "theta", "v"}; }
  std::vector<std::string> rate_names() const override { return {"v_dot", "omega"}; }
  FlatState forward(const Eigen::VectorXd& z) const override;
  Eigen::VectorXd from_flat(const FlatState& f) const override;
  Eigen::Vector2d inverse_rate(const FlatState& f, const Eigen::Vector2d& nu_dot) const override;
  Eigen::Vector2d predict(const Eigen::VectorXd& z, double horizon) const override;
  Eigen::Vector2d flat_control(const Eigen::VectorXd& z, const Eigen::Vector2d& r_future, double alpha,
                               double horizon) const override;
  Eigen::Vector2d direct_nr(const Eigen::VectorXd& z, const Eigen::Vector2d& r_future, double alpha,
                            double horizon) const override;
  Eigen::VectorXd dynamics(const Eigen::VectorXd& z, const Eigen::Vector2d& rates) const override;

 private:
  double v_min_;
};

/// Steering is not clamped: the state may carry any delta, and the model is
/// evaluated at principal_steering(delta). Only cos(delta) = 0 is singular.
class BicycleModel final : public FlatVehicleModel {
 public:
  explicit BicycleModel(double wheelbase_l = 2.0, double v_min = kVMin, double steer_warn = kSteeringWarnAngle);

  double wheelbase() const { return l_; }
  std::string name() const override { return "bicycle"; }
  int flat_order() const override { return 1; }
  std::vector<std::string> state_names() const override { return {"px", "py", "theta", "v", "delta", "a"}; }
  std::vector<std::string> rate_names() const override { return {"a_dot", "omega_delta"}; }
  FlatState forward(const Eigen::VectorXd& z) const override;
  Eigen::VectorXd from_flat(const FlatState& f) const override;
  Eigen::Vector2d inverse_rate(const FlatState& f, const Eigen::Vector2d& nu_dot) const override;
  Eigen::Vector2d predict(const Eigen::VectorXd& z, double horizon) const override;
  Eigen::Vector2d flat_control(const Eigen::VectorXd& z, const Eigen::Vector2d& r_future, double alpha,
                               double horizon) const override;
  Eigen::Vector2d direct_nr(const Eigen::VectorXd& z, const Eigen::Vector2d& r_future, double alpha,
                            double horizon) const override;
  Eigen::VectorXd dynamics(const Eigen::VectorXd& z, const Eigen::Vector2d& rates) const override;
  bool near_singular(const Eigen::VectorXd& z) const override;

 private:
  double l_;
  double v_min_;
  double steer_warn_;
};

// ---------------------------------------------------------------------------
// Finite-difference checks of the block structure relating the flat and the
// direct controllers.

inline constexpr double kFdStep = 1e-6;
inline constexpr double kFdTolerance = 1e-4;

/// Max-norm residuals, each relative to max(1, |reference|).
struct JacobianReport {
  double inverse_residual = 0.0;     ///< dPsi/dz * dPhi/dw - I
  double zero_block_residual = 0.0;  ///< d y~ / du
  double chain_residual = 0.0;       ///< dg/du - dg/dnu * dnu/du
  bool passed(double tol = kFdTolerance) const {
    return inverse_residual < tol && zero_block_residual < tol && chain_residual < tol;
  }
};

/// w = [y; y'; ...; y^(k); nu], the stacked flat coordinates.
Eigen::VectorXd flat_vector(const FlatState& f);
FlatState flat_from_vector(const Eigen::VectorXd& w, int k);

JacobianReport jacobian_block_check(const FlatVehicleModel& model, const Eigen::VectorXd& z, double horizon = 1.0,
                                    double h = kFdStep);

struct DecompositionReport {
  Eigen::Vector2d flat_rates;
  Eigen::Vector2d direct_rates;
  /// du/dy~ * dy~/dt by central differences of Phi, in rate order.
  Eigen::Vector2d fd_drift;
  /// |flat - direct - fd_drift| / max(1, |fd_drift|): the flat law is the
  /// direct NR law plus the drift.
  double residual = 0.0;
};

DecompositionReport controller_decomposition_check(const FlatVehicleModel& model, const Eigen::VectorXd& z,
                                                   const Eigen::Vector2d& r_future, double alpha, double horizon,
                                                   double h = kFdStep);

}  // namespace flatrack
