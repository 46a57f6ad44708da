#pragma once

#include <Eigen/Core>

#include "flatrack/linear_system.hpp"

namespace flatrack {

/// State of the trivial system: y and its first k derivatives, plus the
/// input nu = y^(k+1).
struct FlatState {
  Eigen::MatrixXd derivatives;  ///< m x (k+1); column i holds y^(i)
  Eigen::VectorXd nu;           ///< m

  int m() const { return static_cast<int>(derivatives.rows()); }
  int k() const { return static_cast<int>(derivatives.cols()) - 1; }

  Eigen::VectorXd y() const { return derivatives.col(0); }

  /// [y; y'; ...; y^(k)], the ordering used by trivial_abc.
  Eigen::VectorXd stacked() const;

  static FlatState zero(int m, int k);
  static FlatState from_stacked(const Eigen::VectorXd& y_stack, const Eigen::VectorXd& nu, int m);
};

/// Taylor prediction sum_{i=0}^{k+1} T^i/i! y^(i) (nu plays y^(k+1)).
Eigen::VectorXd trivial_predict(const FlatState& state, const TrivialFlatSpec& spec);

/// NR flow on the flat output: nu' = alpha (k+1)!/T^(k+1) (r(t+T) - y_hat(t+T)).
Eigen::VectorXd nr_flat_rate(const FlatState& state, const Eigen::VectorXd& r_future, const TrivialFlatSpec& spec);

/// Drift-compensated variant: nu' = (k+1)!/T^(k+1) (alpha e - C e^{AT} (A y~ + B nu)).
/// For constant r the prediction error then obeys e' = -alpha e.
Eigen::VectorXd modified_flat_rate(const FlatState& state, const Eigen::VectorXd& r_future,
                                   const TrivialFlatSpec& spec);

/// One forward-Euler step of the integrator chain under the rate nu_dot.
FlatState step_trivial(const FlatState& state, const Eigen::VectorXd& nu_dot, double dt);

/// Max-norm gap between one Euler step of size dt and two of size dt/2
/// (same nu_dot); a local error estimate, O(dt^2).
double euler_step_error_estimate(const FlatState& state, const Eigen::VectorXd& nu_dot, double dt);

}  // namespace flatrack
