#pragma once

#include <optional>
#include <vector>

#include "flatrack/hurwitz.hpp"
#include "flatrack/linear_system.hpp"
#include "flatrack/polynomial.hpp"
#include "flatrack/roots.hpp"

namespace flatrack {

/// Largest admissible condition number of the predictor gain C (int e^{A tau}) B.
inline constexpr double kSingularConditionLimit = 1e10;

/// s^{k+2} + alpha (k+1)!/T^{k+1} sum_{i=0}^{k+1} T^i/i! s^i, the factor whose
/// m-th power is the closed-loop characteristic polynomial of the trivial system.
Polynomiald closed_form_p_alpha_base(const TrivialFlatSpec& spec);

/// The full closed-loop characteristic polynomial, degree m(k+2).
Polynomiald closed_form_p_alpha(const TrivialFlatSpec& spec);

/// Binomial expansion of the closed form graded by alpha: entry i is the
/// coefficient of alpha^{m-i}, i = 0..m.
std::vector<Polynomiald> closed_form_p_list(const TrivialFlatSpec& spec);

/// P_alpha(s) = sum_i alpha^{m-i} P_i(s), recovered from the generic linear system.
struct PAlphaDecomposition {
  int n = 0;
  int m = 0;
  double horizon = 0.0;
  Polynomiald p0;
  std::vector<Polynomiald> p_list;  ///< P_0 .. P_m
  /// Same polynomials in the time-normalised variable sigma = T s with
  /// beta = alpha T; this is where highest-degree terms are identified.
  std::vector<Polynomial<long double>> normalized;
  /// Max relative coefficient mismatch at an extra, unused interpolation node.
  double interpolation_residual = 0.0;

  /// sum_i alpha^{m-i} P_i(s)
  Polynomiald evaluate(double alpha) const;
};

PAlphaDecomposition generic_p_alpha_decomposition(const LinearSystem& sys, double horizon);

struct QExtraction {
  std::vector<Polynomiald> p_tilde;  ///< highest-degree monomial of each P_i
  Polynomiald q;
};

/// P~_i = highest-degree term of each P_i; Q = (1/s^n) sum_i P~_i.
/// Throws InconsistencyError if some P_i vanishes or the sum is not divisible by s^n.
QExtraction extract_q_terms(const std::vector<Polynomiald>& p_list, int n);

inline Polynomiald extract_q(const std::vector<Polynomiald>& p_list, int n) { return extract_q_terms(p_list, n).q; }

struct StabilityCertificate {
  std::optional<Polynomiald> p_alpha_base;  ///< trivial systems only
  Polynomiald p0;
  std::vector<Polynomiald> p_tilde;
  Polynomiald q;
  bool p0_hurwitz = false;
  bool q_hurwitz = false;
  bool alpha_stable_sufficient = false;
  RootReport roots_p0;
  RootReport roots_q;

  int n = 0;
  int m = 0;
  double horizon = 0.0;
  double interpolation_residual = 0.0;
  /// Trivial systems: max relative coefficient error between the generic
  /// reconstruction and the closed form, at spec.alpha.
  std::optional<double> closed_form_agreement;
};

/// Sufficient alpha-stability test: P_0 and Q both Hurwitz.
StabilityCertificate certify(const LinearSystem& sys, double horizon);

/// Trivial-system certificate; also fills the closed-form base factor and
/// checks the generic decomposition against the closed form.
StabilityCertificate certify(const TrivialFlatSpec& spec);

/// Relative tolerance for the closed-form/generic agreement inside certify.
inline constexpr double kClosedFormAgreementTolerance = 1e-8;

}  // namespace flatrack
