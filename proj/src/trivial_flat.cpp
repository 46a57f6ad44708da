#include "flatrack/trivial_flat.hpp"

#include <string>

#include "flatrack/errors.hpp"

namespace flatrack {

namespace {

void check_dims(const FlatState& state, const TrivialFlatSpec& spec) {
  if (state.m() != spec.m || state.k() != spec.k || state.nu.size() != spec.m)
    throw DimensionError("flat state is m=" + std::to_string(state.m()) + ", k=" + std::to_string(state.k()) +
                         " but spec expects m=" + std::to_string(spec.m) + ", k=" + std::to_string(spec.k));
}

void check_vector(const Eigen::VectorXd& v, int m, const char* name) {
  if (v.size() != m)
    throw DimensionError(std::string(name) + " has " + std::to_string(v.size()) + " entries, expected " +
                         std::to_string(m));
}

}  // namespace

Eigen::VectorXd FlatState::stacked() const {
  return Eigen::Map<const Eigen::VectorXd>(derivatives.data(), derivatives.size());
}

FlatState FlatState::zero(int m, int k) {
  return {Eigen::MatrixXd::Zero(m, k + 1), Eigen::VectorXd::Zero(m)};
}

FlatState FlatState::from_stacked(const Eigen::VectorXd& y_stack, const Eigen::VectorXd& nu, int m) {
  if (m < 1 || y_stack.size() % m != 0 || nu.size() != m)
    throw DimensionError("from_stacked: stack length must be a multiple of m and nu must have m entries");
  FlatState out;
  out.derivatives = Eigen::Map<const Eigen::MatrixXd>(y_stack.data(), m, y_stack.size() / m);
  out.nu = nu;
  return out;
}

Eigen::VectorXd trivial_predict(const FlatState& state, const TrivialFlatSpec& spec) {
  check_dims(state, spec);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(spec.m);
  double weight = 1.0;
  for (int i = 0; i <= spec.k; ++i) {
    out += weight * state.derivatives.col(i);
    weight *= spec.horizon / (i + 1);
  }
  return out + weight * state.nu;
}

Eigen::VectorXd nr_flat_rate(const FlatState& state, const Eigen::VectorXd& r_future, const TrivialFlatSpec& spec) {
  check_vector(r_future, spec.m, "r_future");
  return spec.alpha * trivial_gain(spec.k, spec.horizon) * (r_future - trivial_predict(state, spec));
}

Eigen::VectorXd modified_flat_rate(const FlatState& state, const Eigen::VectorXd& r_future,
                                   const TrivialFlatSpec& spec) {
  check_vector(r_future, spec.m, "r_future");
  // C e^{AT} (A y~ + B nu) is the Taylor sum of the once-shifted stack.
  Eigen::VectorXd drift = Eigen::VectorXd::Zero(spec.m);
  double weight = 1.0;
  for (int i = 0; i <= spec.k; ++i) {
    drift += weight * (i < spec.k ? Eigen::VectorXd(state.derivatives.col(i + 1)) : state.nu);
    weight *= spec.horizon / (i + 1);
  }
  const Eigen::VectorXd error = r_future - trivial_predict(state, spec);
  return trivial_gain(spec.k, spec.horizon) * (spec.alpha * error - drift);
}

FlatState step_trivial(const FlatState& state, const Eigen::VectorXd& nu_dot, double dt) {
  if (!(dt > 0.0)) throw DomainError("step_trivial: dt must be positive");
  check_vector(nu_dot, state.m(), "nu_dot");
  FlatState next = state;
  const int k = state.k();
  for (int i = 0; i < k; ++i) next.derivatives.col(i) += dt * state.derivatives.col(i + 1);
  next.derivatives.col(k) += dt * state.nu;
  next.nu += dt * nu_dot;
  return next;
}

double euler_step_error_estimate(const FlatState& state, const Eigen::VectorXd& nu_dot, double dt) {
  const FlatState full = step_trivial(state, nu_dot, dt);
  const FlatState halves = step_trivial(step_trivial(state, nu_dot, dt / 2), nu_dot, dt / 2);
  return std::max((full.derivatives - halves.derivatives).cwiseAbs().maxCoeff(),
                  (full.nu - halves.nu).cwiseAbs().maxCoeff());
}

}  // namespace flatrack
