#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <complex>
#include <initializer_list>
#include <limits>
#include <ostream>

namespace flatrack {

/// Relative floor under which numerically derived high-order coefficients
/// count as zero (pass it explicitly; plain construction drops exact zeros only).
inline constexpr double kTrimTolerance = 1e-12;

/// Real univariate polynomial, coefficients in ascending degree order
/// (coeffs()[i] multiplies s^i). The zero polynomial has no coefficients.
/// Trailing coefficients at or below trim_tol * max|coeff| are dropped.
template <typename Scalar>
class Polynomial {
 public:
  using CoeffVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  /// Degree reported for the zero polynomial.
  static constexpr int kZeroDegree = std::numeric_limits<int>::min();

  Polynomial() = default;

  explicit Polynomial(CoeffVector coeffs, double trim_tol = 0.0) : coeffs_(std::move(coeffs)) {
    trim(trim_tol);
  }

  Polynomial(std::initializer_list<Scalar> coeffs) : coeffs_(static_cast<Eigen::Index>(coeffs.size())) {
    std::copy(coeffs.begin(), coeffs.end(), coeffs_.data());
    trim(0.0);
  }

  static Polynomial monomial(int degree, Scalar coeff = Scalar(1)) {
    CoeffVector c = CoeffVector::Zero(degree + 1);
    c(degree) = coeff;
    return Polynomial(std::move(c));
  }

  const CoeffVector& coeffs() const noexcept { return coeffs_; }

  bool is_zero() const noexcept { return coeffs_.size() == 0; }

  int degree() const noexcept { return is_zero() ? kZeroDegree : static_cast<int>(coeffs_.size()) - 1; }

  /// Coefficient of s^i; zero outside the stored range.
  Scalar coeff(int i) const noexcept {
    return (i >= 0 && i < coeffs_.size()) ? coeffs_(i) : Scalar(0);
  }

  Scalar leading() const noexcept { return is_zero() ? Scalar(0) : coeffs_(coeffs_.size() - 1); }

  Scalar max_abs_coeff() const noexcept { return is_zero() ? Scalar(0) : coeffs_.cwiseAbs().maxCoeff(); }

  template <typename T>
  T operator()(const T& s) const {
    T acc(0);
    for (Eigen::Index i = coeffs_.size() - 1; i >= 0; --i) acc = acc * s + T(coeffs_(i));
    return acc;
  }

  template <typename Other>
  Polynomial<Other> cast() const {
    return Polynomial<Other>(coeffs_.template cast<Other>(), 0.0);
  }

  /// Polynomial in the rescaled variable: q(x) = p(x / factor).
  Polynomial rescaled_variable(Scalar factor) const {
    CoeffVector c = coeffs_;
    Scalar scale(1);
    for (Eigen::Index i = 0; i < c.size(); ++i) {
      c(i) *= scale;
      scale /= factor;
    }
    return Polynomial(std::move(c), 0.0);
  }

  Polynomial operator-() const { return Polynomial(CoeffVector(-coeffs_), 0.0); }

  friend Polynomial operator*(Scalar a, const Polynomial& p) { return Polynomial(CoeffVector(a * p.coeffs_)); }

  friend bool operator==(const Polynomial& a, const Polynomial& b) {
    return a.coeffs_.size() == b.coeffs_.size() && a.coeffs_ == b.coeffs_;
  }

 private:
  void trim(double trim_tol) {
    if (coeffs_.size() == 0) return;
    using std::abs;
    const Scalar floor = Scalar(trim_tol) * coeffs_.cwiseAbs().maxCoeff();
    Eigen::Index n = coeffs_.size();
    while (n > 0 && (abs(coeffs_(n - 1)) <= floor || coeffs_(n - 1) == Scalar(0))) --n;
    coeffs_.conservativeResize(n);
  }

  CoeffVector coeffs_;
};

using Polynomiald = Polynomial<double>;

/// Coefficient convolution.
template <typename Scalar>
Polynomial<Scalar> poly_mul(const Polynomial<Scalar>& p, const Polynomial<Scalar>& q) {
  if (p.is_zero() || q.is_zero()) return {};
  const auto& a = p.coeffs();
  const auto& b = q.coeffs();
  typename Polynomial<Scalar>::CoeffVector c = Polynomial<Scalar>::CoeffVector::Zero(a.size() + b.size() - 1);
  for (Eigen::Index i = 0; i < a.size(); ++i)
    for (Eigen::Index j = 0; j < b.size(); ++j) c(i + j) += a(i) * b(j);
  return Polynomial<Scalar>(std::move(c), 0.0);
}

template <typename Scalar>
Polynomial<Scalar> operator*(const Polynomial<Scalar>& p, const Polynomial<Scalar>& q) {
  return poly_mul(p, q);
}

template <typename Scalar>
Polynomial<Scalar> operator+(const Polynomial<Scalar>& p, const Polynomial<Scalar>& q) {
  const Eigen::Index n = std::max(p.coeffs().size(), q.coeffs().size());
  typename Polynomial<Scalar>::CoeffVector c = Polynomial<Scalar>::CoeffVector::Zero(n);
  c.head(p.coeffs().size()) += p.coeffs();
  c.head(q.coeffs().size()) += q.coeffs();
  return Polynomial<Scalar>(std::move(c));
}

template <typename Scalar>
Polynomial<Scalar> operator-(const Polynomial<Scalar>& p, const Polynomial<Scalar>& q) {
  return p + (-q);
}

template <typename Scalar>
Polynomial<Scalar> poly_pow(const Polynomial<Scalar>& p, int exponent) {
  Polynomial<Scalar> result{Scalar(1)};
  for (int i = 0; i < exponent; ++i) result = poly_mul(result, p);
  return result;
}

/// Monic polynomial with the given roots (used to cross-check root finders).
template <typename Scalar, typename RootRange>
Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, 1> poly_from_roots(const RootRange& roots) {
  Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, 1> c(1);
  c(0) = 1;
  for (const auto& r : roots) {
    Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, 1> next =
        Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, 1>::Zero(c.size() + 1);
    next.tail(c.size()) += c;
    next.head(c.size()) -= std::complex<Scalar>(r) * c;
    c = next;
  }
  return c;
}

/// Largest coefficient-wise relative error |a_i - b_i| / |b_i| (b is the reference).
template <typename Scalar>
Scalar max_relative_coeff_error(const Polynomial<Scalar>& a, const Polynomial<Scalar>& b) {
  using std::abs;
  const int n = std::max(a.degree(), b.degree());
  Scalar worst(0);
  for (int i = 0; i <= n; ++i) {
    const Scalar ref = b.coeff(i);
    const Scalar diff = abs(a.coeff(i) - ref);
    worst = std::max(worst, ref == Scalar(0) ? diff : diff / abs(ref));
  }
  return worst;
}

template <typename Scalar>
std::ostream& operator<<(std::ostream& os, const Polynomial<Scalar>& p) {
  if (p.is_zero()) return os << "0";
  bool first = true;
  for (int i = 0; i <= p.degree(); ++i) {
    if (p.coeff(i) == Scalar(0)) continue;
    if (!first) os << " + ";
    os << p.coeff(i);
    if (i > 0) os << "*s^" << i;
    first = false;
  }
  return os;
}

}  // namespace flatrack
