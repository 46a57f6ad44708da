#include "flatrack/linear_system.hpp"

#include <Eigen/LU>

#include <cmath>
#include <string>

namespace flatrack {

void LinearSystem::validate() const {
  const auto dims = [](const Eigen::MatrixXd& x) {
    return std::to_string(x.rows()) + "x" + std::to_string(x.cols());
  };
  if (a.rows() == 0 || a.rows() != a.cols()) throw DimensionError("LinearSystem: A is " + dims(a) + ", expected square");
  if (b.rows() != a.rows() || b.cols() == 0)
    throw DimensionError("LinearSystem: B is " + dims(b) + ", expected " + std::to_string(a.rows()) + "xm");
  if (c.rows() != b.cols() || c.cols() != a.rows())
    throw DimensionError("LinearSystem: C is " + dims(c) + ", expected " + std::to_string(b.cols()) + "x" +
                         std::to_string(a.rows()));
}

void TrivialFlatSpec::validate() const {
  if (m < 1) throw DomainError("TrivialFlatSpec: m must be >= 1");
  if (k < 0) throw DomainError("TrivialFlatSpec: k must be >= 0");
  if (!(horizon > 0.0) || !std::isfinite(horizon)) throw DomainError("TrivialFlatSpec: T must be positive");
  if (!(alpha > 1.0) || !std::isfinite(alpha)) throw DomainError("TrivialFlatSpec: alpha must exceed 1");
}

double trivial_gain(int k, double horizon) {
  return std::tgamma(static_cast<double>(k) + 2.0) / std::pow(horizon, k + 1);
}

LinearSystem trivial_abc(const TrivialFlatSpec& spec) {
  const int m = spec.m;
  const int n = spec.state_dim();
  LinearSystem sys;
  sys.a = Eigen::MatrixXd::Zero(n, n);
  for (int blk = 0; blk < spec.k; ++blk) sys.a.block(blk * m, (blk + 1) * m, m, m).setIdentity();
  sys.b = Eigen::MatrixXd::Zero(n, m);
  sys.b.bottomRows(m).setIdentity();
  sys.c = Eigen::MatrixXd::Zero(m, n);
  sys.c.leftCols(m).setIdentity();
  return sys;
}

Eigen::MatrixXd gain_assigned_a(const TrivialFlatSpec& spec, std::span<const double> gains) {
  if (static_cast<int>(gains.size()) != spec.k + 1)
    throw DimensionError("gain_assigned_a: expected " + std::to_string(spec.k + 1) + " gains, got " +
                         std::to_string(gains.size()));
  Eigen::MatrixXd a = trivial_abc(spec).a;
  const int m = spec.m;
  for (int i = 0; i <= spec.k; ++i)
    a.block(spec.k * m, i * m, m, m) = -gains[i] * Eigen::MatrixXd::Identity(m, m);
  return a;
}

Eigen::VectorXd linear_predict(const LinearSystem& sys, double horizon, const Eigen::VectorXd& x,
                               const Eigen::VectorXd& u) {
  const auto e = expm_and_integral(sys.a, horizon);
  return sys.c * (e.exp * x + e.integral * (sys.b * u));
}

Eigen::VectorXd linear_nr_rate(const LinearSystem& sys, double horizon, double alpha, const Eigen::VectorXd& x,
                               const Eigen::VectorXd& u, const Eigen::VectorXd& r_future) {
  const Eigen::MatrixXd gain = predictor_gain(sys, horizon);
  return alpha * gain.fullPivLu().solve(r_future - linear_predict(sys, horizon, x, u));
}

}  // namespace flatrack
