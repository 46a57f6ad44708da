#pragma once

#include <Eigen/Core>
#include <Eigen/LU>

#include <span>

#include "flatrack/matrix_functions.hpp"

namespace flatrack {

/// Square linear plant x' = A x + B u, y = C x with m inputs and m outputs.
struct LinearSystem {
  Eigen::MatrixXd a;  ///< n x n
  Eigen::MatrixXd b;  ///< n x m
  Eigen::MatrixXd c;  ///< m x n

  int n() const { return static_cast<int>(a.rows()); }
  int m() const { return static_cast<int>(b.cols()); }

  /// Throws DimensionError unless the blocks are consistent and m inputs map to m outputs.
  void validate() const;
};

/// Chain-of-integrators flat dynamics: m outputs, each integrated k+1 times
/// from the input nu = y^(k+1); prediction horizon T and speedup alpha.
struct TrivialFlatSpec {
  int m = 1;
  int k = 0;
  double horizon = 1.0;
  double alpha = 2.0;

  int state_dim() const { return m * (k + 1); }

  /// Throws DomainError on m < 1, k < 0, T <= 0 or alpha <= 1.
  void validate() const;
};

/// (k+1)! / T^(k+1), the inverse predictor gain of the trivial system.
double trivial_gain(int k, double horizon);

/// Block shift matrix A (identity superdiagonal blocks), B = last block column
/// identity, C = first block row identity (y is the top block of the stack).
LinearSystem trivial_abc(const TrivialFlatSpec& spec);

/// Trivial A with bottom block row -K_1 I ... -K_{k+1} I (gains ordered K_1 first).
Eigen::MatrixXd gain_assigned_a(const TrivialFlatSpec& spec, std::span<const double> gains);

/// C (integral_0^T e^{A tau} d tau) B: the Jacobian of the linear predictor in u.
template <typename Scalar>
MatrixX<Scalar> predictor_gain(const LinearSystem& sys, Scalar horizon) {
  const auto e = expm_and_integral(MatrixX<Scalar>(sys.a.cast<Scalar>()), horizon);
  return sys.c.cast<Scalar>() * e.integral * sys.b.cast<Scalar>();
}

/// y_hat(t+T) = C e^{AT} x + C (integral e^{A tau}) B u.
Eigen::VectorXd linear_predict(const LinearSystem& sys, double horizon, const Eigen::VectorXd& x,
                               const Eigen::VectorXd& u);

/// NR flow rate u' = alpha (C integral B)^{-1} (r(t+T) - y_hat(t+T)).
Eigen::VectorXd linear_nr_rate(const LinearSystem& sys, double horizon, double alpha, const Eigen::VectorXd& x,
                               const Eigen::VectorXd& u, const Eigen::VectorXd& r_future);

/// Closed-loop matrix of the augmented state [x; u] under the NR controller:
/// [[A, B], [-alpha G^{-1} C e^{AT}, -alpha I]] with G = C (integral e^{A tau}) B.
template <typename Scalar>
MatrixX<Scalar> augmented_matrix(const LinearSystem& sys, Scalar horizon, Scalar alpha) {
  const int n = sys.n();
  const int m = sys.m();
  const auto e = expm_and_integral(MatrixX<Scalar>(sys.a.cast<Scalar>()), horizon);
  const MatrixX<Scalar> c = sys.c.cast<Scalar>();
  const MatrixX<Scalar> gain = c * e.integral * sys.b.cast<Scalar>();
  MatrixX<Scalar> out(n + m, n + m);
  out.topLeftCorner(n, n) = sys.a.cast<Scalar>();
  out.topRightCorner(n, m) = sys.b.cast<Scalar>();
  out.bottomLeftCorner(m, n) = -alpha * gain.fullPivLu().solve(c * e.exp);
  out.bottomRightCorner(m, m) = -alpha * MatrixX<Scalar>::Identity(m, m);
  return out;
}

}  // namespace flatrack
