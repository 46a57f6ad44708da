#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "flatrack/errors.hpp"
#include "flatrack/polynomial.hpp"

namespace flatrack {

/// Relative size under which a Routh pivot counts as zero.
inline constexpr double kRouthPivotTolerance = 1e-12;

/// True iff every root of p lies in the open left half-plane, decided by
/// the Routh array. A vanishing pivot (imaginary-axis roots or a
/// degenerate row) is reported as not Hurwitz.
template <typename Scalar>
bool routh_hurwitz(const Polynomial<Scalar>& p) {
  using std::abs;
  if (p.is_zero() || p.degree() < 1) throw DomainError("routh_hurwitz: polynomial must have degree >= 1");

  const int n = p.degree();
  const Scalar sign = p.leading() > Scalar(0) ? Scalar(1) : Scalar(-1);

  // Positive coefficients are necessary; a zero or sign change rules it out.
  for (int i = 0; i <= n; ++i)
    if (!(sign * p.coeff(i) > Scalar(0))) return false;

  std::vector<Scalar> upper, lower;
  for (int i = n; i >= 0; i -= 2) upper.push_back(sign * p.coeff(i));
  for (int i = n - 1; i >= 0; i -= 2) lower.push_back(sign * p.coeff(i));

  for (int row = 1; row <= n; ++row) {
    Scalar scale(0);
    for (Scalar v : upper) scale = std::max(scale, abs(v));
    for (Scalar v : lower) scale = std::max(scale, abs(v));
    const Scalar pivot = lower.empty() ? Scalar(0) : lower.front();
    if (!(pivot > Scalar(kRouthPivotTolerance) * scale)) return false;
    if (row == n) break;

    std::vector<Scalar> next;
    for (std::size_t j = 0; j + 1 < upper.size(); ++j) {
      const Scalar lo = j + 1 < lower.size() ? lower[j + 1] : Scalar(0);
      next.push_back((pivot * upper[j + 1] - upper.front() * lo) / pivot);
    }
    upper = std::move(lower);
    lower = std::move(next);
  }
  return true;
}

}  // namespace flatrack
