#pragma once

#include <Eigen/Core>

#include <cmath>
#include <string>

#include "flatrack/errors.hpp"
#include "flatrack/polynomial.hpp"

namespace flatrack {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// det(sI - M) by the Faddeev-LeVerrier recursion. Monic, degree rows(M).
template <typename Derived>
Polynomial<typename Derived::Scalar> char_poly(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  if (m.rows() != m.cols())
    throw DimensionError("char_poly: matrix is " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                         ", expected square");
  const Eigen::Index n = m.rows();
  const MatrixX<Scalar> a = m;
  VectorX<Scalar> c = VectorX<Scalar>::Zero(n + 1);
  c(n) = Scalar(1);

  // M_k = A M_{k-1} + c_{n-k+1} I,  c_{n-k} = -tr(A M_k) / k
  MatrixX<Scalar> mk = MatrixX<Scalar>::Zero(n, n);
  for (Eigen::Index k = 1; k <= n; ++k) {
    mk = a * mk;
    mk.diagonal().array() += c(n - k + 1);
    c(n - k) = -(a * mk).trace() / Scalar(k);
  }
  return Polynomial<Scalar>(std::move(c), 0.0);
}

template <typename Scalar>
struct ExpmResult {
  MatrixX<Scalar> exp;       ///< e^{A T}
  MatrixX<Scalar> integral;  ///< integral_0^T e^{A tau} d tau
};

/// Taylor order used after scaling; with the scaled norm held at or
/// below 1/2 the truncation error sits under 1e-22.
inline constexpr int kExpmTaylorOrder = 18;

/// e^{AT} and its integral over [0, T], read off the exponential of the
/// block matrix [[A, I], [0, 0]] T (scaling and squaring, fixed-order Taylor).
template <typename Derived>
ExpmResult<typename Derived::Scalar> expm_and_integral(const Eigen::MatrixBase<Derived>& a,
                                                       typename Derived::Scalar horizon) {
  using Scalar = typename Derived::Scalar;
  using std::abs;
  using std::ceil;
  using std::log2;
  if (a.rows() != a.cols()) throw DimensionError("expm_and_integral: matrix is not square");
  if (!a.allFinite() || !std::isfinite(static_cast<double>(horizon)))
    throw NumericError("expm_and_integral: non-finite input");

  const Eigen::Index n = a.rows();
  MatrixX<Scalar> x = MatrixX<Scalar>::Zero(2 * n, 2 * n);
  x.topLeftCorner(n, n) = a * horizon;
  x.topRightCorner(n, n) = MatrixX<Scalar>::Identity(n, n) * horizon;

  const Scalar norm = x.cwiseAbs().colwise().sum().maxCoeff();
  int squarings = 0;
  if (norm > Scalar(0.5)) squarings = static_cast<int>(ceil(log2(static_cast<double>(norm / Scalar(0.5)))));
  x /= std::ldexp(Scalar(1), squarings);

  // Horner: I + X(I + X/2 (I + X/3 (...)))
  const MatrixX<Scalar> eye = MatrixX<Scalar>::Identity(2 * n, 2 * n);
  MatrixX<Scalar> e = eye;
  for (int j = kExpmTaylorOrder; j >= 1; --j) e = eye + (x * e) / Scalar(j);
  for (int i = 0; i < squarings; ++i) e = (e * e).eval();

  if (!e.allFinite()) throw NumericError("expm_and_integral: overflow while squaring");
  return {e.topLeftCorner(n, n), e.topRightCorner(n, n)};
}

}  // namespace flatrack
