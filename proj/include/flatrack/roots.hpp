#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "flatrack/errors.hpp"
#include "flatrack/polynomial.hpp"

namespace flatrack {

inline constexpr double kRootTolerance = 1e-10;
inline constexpr int kRootMaxIterations = 200;
/// Roots with real part in [-kHurwitzMargin, inf) are treated as not strictly stable.
inline constexpr double kHurwitzMargin = 1e-9;

struct RootReport {
  std::vector<std::complex<double>> roots;
  double max_real_part = -std::numeric_limits<double>::infinity();
  bool hurwitz = false;
};

namespace detail {

/// Horner evaluation of p and p' at z, plus the rounding-error bound
/// sum |a_i| |z|^i used to recognise roots that cannot be refined further.
template <typename Scalar>
void eval_with_bound(const std::vector<Scalar>& a, std::complex<Scalar> z, std::complex<Scalar>& p,
                     std::complex<Scalar>& dp, Scalar& bound) {
  using std::abs;
  p = a.back();
  dp = 0;
  bound = abs(a.back());
  const Scalar az = abs(z);
  for (std::size_t i = a.size() - 1; i-- > 0;) {
    dp = dp * z + p;
    p = p * z + a[i];
    bound = bound * az + abs(a[i]);
  }
}

/// Value of the j-th derivative of p (ascending coefficients) at z, with the
/// matching rounding bound sum |a_i| i!/(i-j)! |z|^(i-j).
template <typename Scalar>
void derivative_with_bound(const std::vector<Scalar>& a, int j, std::complex<Scalar> z, std::complex<Scalar>& value,
                           Scalar& bound) {
  using std::abs;
  const int deg = static_cast<int>(a.size()) - 1;
  value = 0;
  bound = 0;
  const Scalar az = abs(z);
  for (int i = deg; i >= j; --i) {
    Scalar falling(1);
    for (int q = 0; q < j; ++q) falling *= Scalar(i - q);
    value = value * z + falling * a[i];
    bound = bound * az + falling * abs(a[i]);
  }
}

/// Roots of a k-fold cluster only resolve to about eps^(1/k); their common
/// value is recovered as the simple root of p^(k-1) near the cluster mean.
/// The polished point replaces the cluster only if p, p', ..., p^(k-1) all
/// vanish there to rounding level, so distinct close roots are left alone.
template <typename Scalar>
void polish_clusters(const std::vector<Scalar>& a, std::vector<std::complex<Scalar>>& z) {
  using std::abs;
  using Complex = std::complex<Scalar>;
  const Scalar eps = std::numeric_limits<Scalar>::epsilon();
  const Scalar radius = Scalar(1e-3);
  const int deg = static_cast<int>(a.size()) - 1;
  std::vector<bool> used(z.size(), false);
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (used[i]) continue;
    std::vector<std::size_t> members{i};
    for (std::size_t j = i + 1; j < z.size(); ++j)
      if (!used[j] && abs(z[j] - z[i]) < radius * std::max(Scalar(1), abs(z[i]))) members.push_back(j);
    const int k = static_cast<int>(members.size());
    if (k < 2) continue;

    Complex c(0);
    for (auto idx : members) c += z[idx];
    c /= Scalar(k);
    for (int iter = 0; iter < 10; ++iter) {
      Complex f, df;
      Scalar bf, bdf;
      derivative_with_bound(a, k - 1, c, f, bf);
      derivative_with_bound(a, k, c, df, bdf);
      if (df == Complex(0)) break;
      const Complex step = f / df;
      c -= step;
      if (abs(step) <= eps * std::max(Scalar(1), abs(c))) break;
    }
    bool multiple = true;
    for (int j = 0; j < k && multiple; ++j) {
      Complex f;
      Scalar bound;
      derivative_with_bound(a, j, c, f, bound);
      multiple = abs(f) <= Scalar(16 * deg) * eps * bound;
    }
    if (!multiple) continue;
    for (auto idx : members) {
      z[idx] = c;
      used[idx] = true;
    }
  }
}

}  // namespace detail

/// All complex roots of p by Aberth-Ehrlich simultaneous iteration, started
/// on a slightly perturbed circle whose radius is the Cauchy bound.
template <typename Scalar>
RootReport poly_roots(const Polynomial<Scalar>& p, double tol = kRootTolerance, int max_iter = kRootMaxIterations) {
  using std::abs;
  using Complex = std::complex<Scalar>;
  if (p.is_zero() || p.degree() < 1) throw DomainError("poly_roots: polynomial must have degree >= 1");

  std::vector<Complex> roots;
  // Exact zero roots come off first.
  int lowest = 0;
  while (p.coeff(lowest) == Scalar(0)) ++lowest;
  roots.assign(lowest, Complex(0));

  std::vector<Scalar> a;
  const Scalar lead = p.leading();
  for (int i = lowest; i <= p.degree(); ++i) a.push_back(p.coeff(i) / lead);
  const int deg = static_cast<int>(a.size()) - 1;

  if (deg >= 1) {
    Scalar radius(0);
    for (int i = 0; i < deg; ++i) radius = std::max(radius, abs(a[i]));
    radius += Scalar(1);

    std::vector<Complex> z(deg);
    std::vector<bool> done(deg, false);
    for (int i = 0; i < deg; ++i) {
      const Scalar angle = Scalar(2 * std::numbers::pi) * Scalar(i) / Scalar(deg) + Scalar(0.4);
      const Scalar r = radius * (Scalar(1) + Scalar(0.01) * Scalar(i % 3));
      z[i] = std::polar(r, angle);
    }

    const Scalar eps = std::numeric_limits<Scalar>::epsilon();
    int iter = 0;
    for (; iter < max_iter; ++iter) {
      bool all_done = true;
      for (int i = 0; i < deg; ++i) {
        if (done[i]) continue;
        Complex val, der;
        Scalar bound;
        detail::eval_with_bound(a, z[i], val, der, bound);
        if (abs(val) <= Scalar(4 * deg) * eps * bound) {
          done[i] = true;
          continue;
        }
        Complex repulsion(0);
        for (int j = 0; j < deg; ++j)
          if (j != i) repulsion += Complex(1) / (z[i] - z[j]);
        const Complex newton = der == Complex(0) ? Complex(tol) : val / der;
        const Complex step = newton / (Complex(1) - newton * repulsion);
        z[i] -= step;
        if (abs(step) < Scalar(tol) * std::max(Scalar(1), abs(z[i])))
          done[i] = true;
        else
          all_done = false;
      }
      if (all_done && std::all_of(done.begin(), done.end(), [](bool d) { return d; })) break;
    }

    if (iter == max_iter) {
      std::vector<std::complex<double>> best;
      for (const auto& r : roots) best.emplace_back(static_cast<double>(r.real()), static_cast<double>(r.imag()));
      for (const auto& r : z) best.emplace_back(static_cast<double>(r.real()), static_cast<double>(r.imag()));
      throw ConvergenceError("poly_roots: no convergence after " + std::to_string(max_iter) + " iterations",
                             std::move(best));
    }
    detail::polish_clusters(a, z);
    roots.insert(roots.end(), z.begin(), z.end());
  }

  RootReport report;
  for (const auto& r : roots) {
    report.roots.emplace_back(static_cast<double>(r.real()), static_cast<double>(r.imag()));
    report.max_real_part = std::max(report.max_real_part, static_cast<double>(r.real()));
  }
  std::sort(report.roots.begin(), report.roots.end(), [](const auto& x, const auto& y) {
    return x.real() != y.real() ? x.real() < y.real() : x.imag() < y.imag();
  });
  report.hurwitz = report.max_real_part < -kHurwitzMargin;
  return report;
}

}  // namespace flatrack
