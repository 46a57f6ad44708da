#include "flatrack/stability.hpp"

#include <Eigen/LU>
#include <Eigen/SVD>

#include <cmath>
#include <sstream>
#include <string>

namespace flatrack {

namespace {

using Extended = long double;

/// c (k+1)!/T^{k+1} sum_{i=0}^{k+1} T^i/i! s^i without the alpha factor.
Polynomiald maclaurin_factor(int k, double horizon) {
  const double gain = trivial_gain(k, horizon);
  Eigen::VectorXd c(k + 2);
  double term = 1.0;
  for (int i = 0; i <= k + 1; ++i) {
    c(i) = gain * term;
    term *= horizon / (i + 1);
  }
  return Polynomiald(std::move(c));
}

double binomial(int n, int r) {
  double out = 1.0;
  for (int i = 1; i <= r; ++i) out = out * (n - r + i) / i;
  return out;
}

void check_predictor_gain(const LinearSystem& sys, double horizon) {
  const MatrixX<Extended> gain = predictor_gain<Extended>(sys, horizon);
  Eigen::JacobiSVD<MatrixX<Extended>> svd(gain);
  const auto& sv = svd.singularValues();
  const double cond = static_cast<double>(sv(0) / sv(sv.size() - 1));
  if (!(cond < kSingularConditionLimit)) {
    std::ostringstream msg;
    msg << "predictor gain C*integral_0^T(e^{A tau})*B is singular (condition number " << cond << ")";
    throw SingularityError(msg.str());
  }
}

VectorX<Extended> char_poly_coeffs(const MatrixX<Extended>& top, const MatrixX<Extended>& feedback, int m,
                                   Extended beta) {
  const Eigen::Index n = top.rows();
  MatrixX<Extended> mat(n + m, n + m);
  mat.topRows(n) = top;
  mat.bottomLeftCorner(m, n) = -beta * feedback;
  mat.bottomRightCorner(m, m) = -beta * MatrixX<Extended>::Identity(m, m);
  return char_poly(mat).coeffs();
}

}  // namespace

Polynomiald closed_form_p_alpha_base(const TrivialFlatSpec& spec) {
  spec.validate();
  return spec.alpha * maclaurin_factor(spec.k, spec.horizon) + Polynomiald::monomial(spec.k + 2);
}

Polynomiald closed_form_p_alpha(const TrivialFlatSpec& spec) {
  return poly_pow(closed_form_p_alpha_base(spec), spec.m);
}

std::vector<Polynomiald> closed_form_p_list(const TrivialFlatSpec& spec) {
  spec.validate();
  const Polynomiald factor = maclaurin_factor(spec.k, spec.horizon);
  std::vector<Polynomiald> out;
  for (int i = 0; i <= spec.m; ++i)
    out.push_back(poly_mul(Polynomiald::monomial((spec.k + 2) * i, binomial(spec.m, i)), poly_pow(factor, spec.m - i)));
  return out;
}

Polynomiald PAlphaDecomposition::evaluate(double alpha) const {
  Polynomiald out;
  for (int i = 0; i <= m; ++i) out = out + std::pow(alpha, m - i) * p_list[i];
  return out;
}

PAlphaDecomposition generic_p_alpha_decomposition(const LinearSystem& sys, double horizon) {
  sys.validate();
  if (!(horizon > 0.0) || !std::isfinite(horizon)) throw DomainError("generic_p_alpha_decomposition: T must be positive");
  check_predictor_gain(sys, horizon);

  const int n = sys.n();
  const int m = sys.m();
  const int total = n + m;
  const Extended t = horizon;

  // Work with T M(beta / T): its characteristic polynomial in sigma = T s is
  // T^N P_alpha(sigma / T), and the alpha-grading survives with beta = alpha T.
  const auto e = expm_and_integral(MatrixX<Extended>(sys.a.cast<Extended>()), t);
  const MatrixX<Extended> c = sys.c.cast<Extended>();
  const MatrixX<Extended> gain = c * e.integral * sys.b.cast<Extended>();
  const MatrixX<Extended> feedback = gain.fullPivLu().solve(c * e.exp);
  MatrixX<Extended> top(n, total);
  top.leftCols(n) = t * sys.a.cast<Extended>();
  top.rightCols(m) = t * sys.b.cast<Extended>();

  // Degree in beta is at most m: m+1 nodes determine it exactly.
  MatrixX<Extended> vander(m + 1, m + 1);
  MatrixX<Extended> samples(m + 1, total + 1);
  for (int j = 0; j <= m; ++j) {
    const Extended beta = j + 1;
    for (int p = 0; p <= m; ++p) vander(j, p) = std::pow(beta, p);
    samples.row(j) = char_poly_coeffs(top, feedback, m, beta).transpose();
  }
  const MatrixX<Extended> graded = vander.fullPivLu().solve(samples);  // row p: coefficient of beta^p

  PAlphaDecomposition out;
  out.n = n;
  out.m = m;
  out.horizon = horizon;

  // Residual at a node the fit never saw.
  {
    const Extended beta = m + 2;
    const VectorX<Extended> actual = char_poly_coeffs(top, feedback, m, beta);
    VectorX<Extended> rebuilt = VectorX<Extended>::Zero(total + 1);
    for (int p = 0; p <= m; ++p) rebuilt += std::pow(beta, p) * graded.row(p).transpose();
    out.interpolation_residual =
        static_cast<double>((rebuilt - actual).cwiseAbs().maxCoeff() / actual.cwiseAbs().maxCoeff());
  }

  for (int i = 0; i <= m; ++i) {
    Polynomial<Extended> normalized(VectorX<Extended>(graded.row(m - i).transpose()), kTrimTolerance);
    // P_i(s) = T^{m-i-N} P'_i(T s)
    Eigen::VectorXd coeffs(std::max(normalized.degree() + 1, 0));
    for (int j = 0; j <= normalized.degree(); ++j)
      coeffs(j) = static_cast<double>(normalized.coeff(j) * std::pow(t, m - i - total + j));
    out.normalized.push_back(std::move(normalized));
    out.p_list.emplace_back(std::move(coeffs), 0.0);
  }
  out.p0 = out.p_list.front();
  return out;
}

QExtraction extract_q_terms(const std::vector<Polynomiald>& p_list, int n) {
  QExtraction out;
  for (std::size_t i = 0; i < p_list.size(); ++i) {
    const Polynomiald p(p_list[i].coeffs(), kTrimTolerance);
    if (p.is_zero())
      throw InconsistencyError("extract_q: P_" + std::to_string(i) + " vanishes, highest-degree term undefined");
    out.p_tilde.push_back(Polynomiald::monomial(p.degree(), p.leading()));
  }

  Polynomiald sum;
  for (const auto& term : out.p_tilde) sum = sum + term;
  const double floor = kTrimTolerance * sum.max_abs_coeff();
  for (int j = 0; j < n && j <= sum.degree(); ++j)
    if (std::abs(sum.coeff(j)) > floor)
      throw InconsistencyError("extract_q: sum of highest-degree terms has a nonzero s^" + std::to_string(j) +
                               " term, not divisible by s^" + std::to_string(n));
  if (sum.degree() < n) throw InconsistencyError("extract_q: sum of highest-degree terms has degree below n");
  out.q = Polynomiald(Eigen::VectorXd(sum.coeffs().tail(sum.degree() - n + 1)));
  return out;
}

namespace {

RootReport safe_roots(const Polynomial<Extended>& p, double variable_scale) {
  RootReport report;
  if (p.degree() < 1) {
    report.hurwitz = !p.is_zero();
    return report;
  }
  try {
    report = poly_roots(p);
  } catch (const ConvergenceError& err) {
    report.roots = err.best_iterate();
    for (const auto& r : report.roots) report.max_real_part = std::max(report.max_real_part, r.real());
  }
  for (auto& r : report.roots) r /= variable_scale;
  report.max_real_part /= variable_scale;
  report.hurwitz = report.max_real_part < -kHurwitzMargin;
  return report;
}

bool hurwitz_or_constant(const Polynomial<Extended>& p) {
  // A nonzero constant has no roots, so the open-LHP condition holds vacuously.
  if (p.degree() == 0) return true;
  if (p.is_zero()) return false;
  return routh_hurwitz(p);
}

StabilityCertificate certify_decomposition(const PAlphaDecomposition& dec) {
  StabilityCertificate cert;
  cert.n = dec.n;
  cert.m = dec.m;
  cert.horizon = dec.horizon;
  cert.interpolation_residual = dec.interpolation_residual;
  cert.p0 = dec.p0;

  // The leading monomial is located in normalised units, where relative
  // trimming is meaningful, then mapped back: P~_i(s) = T^{m-i-N+d} c' s^d.
  const int total = dec.n + dec.m;
  std::vector<Polynomiald> tilde;
  for (int i = 0; i <= dec.m; ++i) {
    const auto& normalized = dec.normalized[i];
    if (normalized.is_zero())
      throw InconsistencyError("certify: P_" + std::to_string(i) + " vanishes, highest-degree term undefined");
    const int d = normalized.degree();
    const double coeff = static_cast<double>(normalized.leading() *
                                             std::pow(static_cast<Extended>(dec.horizon), dec.m - i - total + d));
    tilde.push_back(Polynomiald::monomial(d, coeff));
  }
  QExtraction q = extract_q_terms(tilde, dec.n);
  cert.p_tilde = std::move(q.p_tilde);
  cert.q = std::move(q.q);

  // Hurwitz-ness is invariant under s -> sigma / T with T > 0, so P_0 is
  // judged in normalised form where its coefficients are well scaled.
  cert.p0_hurwitz = hurwitz_or_constant(dec.normalized.front());
  const Polynomial<Extended> q_ext = cert.q.cast<Extended>();
  cert.q_hurwitz = hurwitz_or_constant(q_ext);
  cert.alpha_stable_sufficient = cert.p0_hurwitz && cert.q_hurwitz;
  cert.roots_p0 = safe_roots(dec.normalized.front(), dec.horizon);
  cert.roots_q = safe_roots(q_ext, 1.0);
  return cert;
}

}  // namespace

StabilityCertificate certify(const LinearSystem& sys, double horizon) {
  return certify_decomposition(generic_p_alpha_decomposition(sys, horizon));
}

StabilityCertificate certify(const TrivialFlatSpec& spec) {
  spec.validate();
  const PAlphaDecomposition dec = generic_p_alpha_decomposition(trivial_abc(spec), spec.horizon);
  StabilityCertificate cert = certify_decomposition(dec);
  cert.p_alpha_base = closed_form_p_alpha_base(spec);
  const double agreement = max_relative_coeff_error(dec.evaluate(spec.alpha), closed_form_p_alpha(spec));
  cert.closed_form_agreement = agreement;
  if (!(agreement < kClosedFormAgreementTolerance)) {
    std::ostringstream msg;
    msg << "certify: generic and closed-form P_alpha disagree (max relative coefficient error " << agreement << ")";
    throw InconsistencyError(msg.str());
  }
  return cert;
}

}  // namespace flatrack
