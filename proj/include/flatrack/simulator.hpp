#pragma once

#include <Eigen/Core>

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "flatrack/trivial_flat.hpp"
#include "flatrack/vehicle_models.hpp"

namespace flatrack {

// References ------------------------------------------------------------------

enum class ReferenceKind { sine, spiral, constant, file };
enum class Interpolation { linear, previous };

/// Parameters (all optional, unknown names rejected):
///   sine:     x_rate = 0.2, amplitude = 10, period = 50
///             r(t) = (x_rate t, amplitude sin(2 pi t / period))
///   spiral:   growth = 0.0125, angular_rate = 0.25, s0 = 284
///             r(t) = e^{growth s} (cos(angular_rate s), sin(angular_rate s)), s = s0 - t
///   constant: x = 0, y = 0
///   file:     CSV rows "t,x,y" (header optional), strictly increasing t
struct ReferenceSpec {
  ReferenceKind kind = ReferenceKind::sine;
  std::map<std::string, double> parameters;
  std::string path;
  Interpolation interpolation = Interpolation::linear;

  std::vector<std::string> violations() const;
};

/// A ready-to-evaluate reference; file samples are loaded once.
class Reference {
 public:
  explicit Reference(const ReferenceSpec& spec);

  /// Analytic kinds extrapolate freely; the file kind clamps past the last
  /// sample and throws DomainError before the first.
  Eigen::Vector2d operator()(double t) const;

 private:
  ReferenceKind kind_;
  Interpolation interpolation_;
  double p0_ = 0.0, p1_ = 0.0, p2_ = 0.0;
  std::vector<double> times_;
  std::vector<Eigen::Vector2d> points_;
};

Eigen::Vector2d eval_reference(const ReferenceSpec& spec, double t);

std::string to_string(ReferenceKind kind);

// Scenarios -------------------------------------------------------------------

enum class ModelKind { unicycle, bicycle, trivial };
enum class ControllerKind { nr_flat, nr_direct, modified };

std::string to_string(ModelKind kind);
std::string to_string(ControllerKind kind);

/// model_params by model:
///   unicycle: v_min
///   bicycle:  l (2), v_min, steer_warn (pi/2 - 0.05)
///   trivial:  k (1); m is fixed at 2
/// initial_state: unicycle (px, py, theta[, v]); bicycle (px, py, theta[, v[, delta, a]]);
/// trivial [y; y'; ...; y^(k); nu] of length 2(k+2), or empty for all zeros.
/// Missing extended states default to v = 1, delta = 0, a = 0.
struct ScenarioConfig {
  ModelKind model = ModelKind::unicycle;
  ControllerKind controller = ControllerKind::nr_flat;
  double alpha = 100.0;
  double horizon = 0.02;
  double dt = 1e-3;
  double duration = 100.0;
  ReferenceSpec reference;
  std::vector<double> initial_state;
  std::map<std::string, double> model_params;

  /// Every problem found, empty when valid.
  std::vector<std::string> violations() const;
  /// Throws ValidationError listing all violations.
  void validate() const;
};

// Traces --------------------------------------------------------------------

enum class RunStatus { completed, truncated_singular };

std::string to_string(RunStatus status);

struct TraceRecord {
  double t = 0.0;
  Eigen::VectorXd state;
  Eigen::Vector2d rates;  ///< NaN where the controller was not evaluated
  Eigen::Vector2d y;
  Eigen::Vector2d r;
  Eigen::Vector2d r_future;
  Eigen::Vector2d y_pred;
  double err = 0.0;  ///< |r(t) - y(t)|
};

struct SimTrace {
  std::string model;
  std::vector<std::string> state_names;
  std::vector<std::string> rate_names;
  double dt = 0.0;
  double horizon = 0.0;
  std::size_t expected_records = 0;
  std::vector<TraceRecord> records;
  RunStatus status = RunStatus::completed;
  std::vector<std::string> diagnostics;
};

/// floor(duration / dt) + 1, tolerant to representation error in the ratio.
std::size_t record_count(double duration, double dt);

/// Forward-Euler closed loop. A singular or out-of-domain state ends the
/// run with status truncated_singular instead of throwing.
SimTrace run_scenario(const ScenarioConfig& cfg);

// Metrics ---------------------------------------------------------------------

inline constexpr double kDefaultSettleFraction = 0.02;

struct TraceMetrics {
  std::size_t records = 0;
  RunStatus status = RunStatus::completed;
  bool partial = false;
  double initial_error = 0.0;
  double final_error = 0.0;
  /// First t after which err <= settle_fraction * err(0) for good; nullopt if never.
  std::optional<double> settling_time;
  /// Max err from the settling time on (nullopt if never settled).
  std::optional<double> max_error_after_settling;
  /// Max err over t >= t_last / 2.
  double steady_state_max_error = 0.0;
  std::vector<double> rate_min;
  std::vector<double> rate_max;
};

/// Settling time of a sampled error signal; see TraceMetrics::settling_time.
std::optional<double> settling_time(const std::vector<double>& t, const std::vector<double>& err,
                                    double settle_fraction);

/// Throws DomainError on an empty trace.
TraceMetrics compute_metrics(const SimTrace& trace, double settle_fraction = kDefaultSettleFraction);

/// Max |r(t) - y(t)| over records with t in [t0, t1].
double max_error_between(const SimTrace& trace, double t0, double t1);

}  // namespace flatrack
