#include "flatrack/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>

#include "flatrack/errors.hpp"
#include "flatrack/linear_system.hpp"

namespace flatrack {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

const std::map<ReferenceKind, std::map<std::string, double>>& reference_defaults() {
  static const std::map<ReferenceKind, std::map<std::string, double>> defaults{
      {ReferenceKind::sine, {{"x_rate", 0.2}, {"amplitude", 10.0}, {"period", 50.0}}},
      {ReferenceKind::spiral, {{"growth", 0.0125}, {"angular_rate", 0.25}, {"s0", 284.0}}},
      {ReferenceKind::constant, {{"x", 0.0}, {"y", 0.0}}},
      {ReferenceKind::file, {}},
  };
  return defaults;
}

double param_or(const std::map<std::string, double>& params, const std::string& key, double fallback) {
  const auto it = params.find(key);
  return it == params.end() ? fallback : it->second;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

bool parse_double(const std::string& text, double& out) {
  try {
    std::size_t used = 0;
    out = std::stod(text, &used);
    return text.find_first_not_of(" \t\r", used) == std::string::npos;
  } catch (const std::exception&) {
    return false;
  }
}

}  // namespace

std::string to_string(ReferenceKind kind) {
  switch (kind) {
    case ReferenceKind::sine: return "sine";
    case ReferenceKind::spiral: return "spiral";
    case ReferenceKind::constant: return "constant";
    case ReferenceKind::file: return "file";
  }
  return "?";
}

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::unicycle: return "unicycle";
    case ModelKind::bicycle: return "bicycle";
    case ModelKind::trivial: return "trivial";
  }
  return "?";
}

std::string to_string(ControllerKind kind) {
  switch (kind) {
    case ControllerKind::nr_flat: return "nr_flat";
    case ControllerKind::nr_direct: return "nr_direct";
    case ControllerKind::modified: return "modified";
  }
  return "?";
}

std::string to_string(RunStatus status) {
  return status == RunStatus::completed ? "completed" : "truncated_singular";
}

// References ------------------------------------------------------------------

std::vector<std::string> ReferenceSpec::violations() const {
  std::vector<std::string> out;
  const auto& allowed = reference_defaults().at(kind);
  for (const auto& [key, value] : parameters) {
    if (!allowed.count(key))
      out.push_back("reference.parameters." + key + ": unknown for kind " + to_string(kind));
    else if (!std::isfinite(value))
      out.push_back("reference.parameters." + key + ": must be finite");
  }
  if (kind == ReferenceKind::sine && param_or(parameters, "period", 50.0) == 0.0)
    out.push_back("reference.parameters.period: must be nonzero");
  if (kind == ReferenceKind::file && path.empty()) out.push_back("reference.path: required for kind file");
  return out;
}

Reference::Reference(const ReferenceSpec& spec) : kind_(spec.kind), interpolation_(spec.interpolation) {
  if (const auto v = spec.violations(); !v.empty()) throw ValidationError(v);
  const auto& p = spec.parameters;
  switch (kind_) {
    case ReferenceKind::sine:
      p0_ = param_or(p, "x_rate", 0.2);
      p1_ = param_or(p, "amplitude", 10.0);
      p2_ = param_or(p, "period", 50.0);
      break;
    case ReferenceKind::spiral:
      p0_ = param_or(p, "growth", 0.0125);
      p1_ = param_or(p, "angular_rate", 0.25);
      p2_ = param_or(p, "s0", 284.0);
      break;
    case ReferenceKind::constant:
      p0_ = param_or(p, "x", 0.0);
      p1_ = param_or(p, "y", 0.0);
      break;
    case ReferenceKind::file: {
      std::ifstream in(spec.path);
      if (!in) throw DomainError("reference file " + spec.path + " cannot be read");
      std::string line;
      int line_no = 0;
      while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto cells = split_csv(line);
        double t, x, y;
        if (cells.size() != 3 || !parse_double(cells[0], t) || !parse_double(cells[1], x) ||
            !parse_double(cells[2], y)) {
          if (line_no == 1) continue;  // header
          throw DomainError(spec.path + ":" + std::to_string(line_no) + ": expected t,x,y");
        }
        if (!times_.empty() && !(t > times_.back()))
          throw DomainError(spec.path + ":" + std::to_string(line_no) + ": sample times must strictly increase");
        times_.push_back(t);
        points_.emplace_back(x, y);
      }
      if (times_.empty()) throw DomainError("reference file " + spec.path + " has no samples");
      break;
    }
  }
}

Eigen::Vector2d Reference::operator()(double t) const {
  switch (kind_) {
    case ReferenceKind::sine:
      return {p0_ * t, p1_ * std::sin(2.0 * std::numbers::pi * t / p2_)};
    case ReferenceKind::spiral: {
      const double s = p2_ - t;
      return std::exp(p0_ * s) * Eigen::Vector2d(std::cos(p1_ * s), std::sin(p1_ * s));
    }
    case ReferenceKind::constant:
      return {p0_, p1_};
    case ReferenceKind::file: {
      if (t < times_.front()) throw DomainError("reference lookup before the first file sample");
      if (t >= times_.back()) return points_.back();
      const auto hi = static_cast<std::size_t>(std::upper_bound(times_.begin(), times_.end(), t) - times_.begin());
      const std::size_t lo = hi - 1;
      if (interpolation_ == Interpolation::previous) return points_[lo];
      const double w = (t - times_[lo]) / (times_[hi] - times_[lo]);
      return (1.0 - w) * points_[lo] + w * points_[hi];
    }
  }
  return {kNaN, kNaN};
}

Eigen::Vector2d eval_reference(const ReferenceSpec& spec, double t) { return Reference(spec)(t); }

// Scenario validation ---------------------------------------------------------

namespace {

const std::set<std::string>& allowed_model_params(ModelKind model) {
  static const std::map<ModelKind, std::set<std::string>> allowed{
      {ModelKind::unicycle, {"v_min"}},
      {ModelKind::bicycle, {"l", "v_min", "steer_warn"}},
      {ModelKind::trivial, {"k"}},
  };
  return allowed.at(model);
}

int trivial_order(const ScenarioConfig& cfg) { return static_cast<int>(param_or(cfg.model_params, "k", 1.0)); }

}  // namespace

std::vector<std::string> ScenarioConfig::violations() const {
  std::vector<std::string> out;
  auto positive = [&](const char* name, double value) {
    if (!(value > 0.0) || !std::isfinite(value)) out.push_back(std::string(name) + ": must be a positive finite number");
  };
  positive("dt", dt);
  positive("horizon_T", horizon);
  if (!(duration >= 0.0) || !std::isfinite(duration)) out.push_back("duration: must be a finite number >= 0");
  if (!(alpha > 1.0) || !std::isfinite(alpha)) out.push_back("alpha: must be a finite number > 1");

  for (const auto& v : reference.violations()) out.push_back(v);

  const auto& allowed = allowed_model_params(model);
  for (const auto& [key, value] : model_params) {
    if (!allowed.count(key))
      out.push_back("model_params." + key + ": unknown for model " + to_string(model));
    else if (!std::isfinite(value))
      out.push_back("model_params." + key + ": must be finite");
  }
  if (model == ModelKind::bicycle && !(param_or(model_params, "l", 2.0) > 0.0))
    out.push_back("model_params.l: wheelbase must be positive");
  if (model_params.count("v_min") && !(model_params.at("v_min") > 0.0))
    out.push_back("model_params.v_min: must be positive");

  for (double x : initial_state)
    if (!std::isfinite(x)) {
      out.push_back("initial_state: entries must be finite");
      break;
    }
  const auto size = initial_state.size();
  switch (model) {
    case ModelKind::unicycle:
      if (size != 3 && size != 4) out.push_back("initial_state: unicycle takes (px, py, theta[, v])");
      break;
    case ModelKind::bicycle:
      if (size != 3 && size != 4 && size != 6)
        out.push_back("initial_state: bicycle takes (px, py, theta[, v[, delta, a]])");
      break;
    case ModelKind::trivial: {
      const double k = param_or(model_params, "k", 1.0);
      if (!(k >= 0.0) || k != std::floor(k) || k > 16) {
        out.push_back("model_params.k: must be an integer in [0, 16]");
      } else if (size != 0 && size != static_cast<std::size_t>(2 * (static_cast<int>(k) + 2))) {
        out.push_back("initial_state: trivial model with k=" + std::to_string(static_cast<int>(k)) + " takes " +
                      std::to_string(2 * (static_cast<int>(k) + 2)) + " entries [y; y'; ...; nu] or none");
      }
      break;
    }
  }
  return out;
}

void ScenarioConfig::validate() const {
  if (auto v = violations(); !v.empty()) throw ValidationError(std::move(v));
}

std::size_t record_count(double duration, double dt) {
  // Ratios such as 0.3 / 0.1 land a hair under the integer; nudge before flooring.
  return static_cast<std::size_t>(std::floor(duration / dt * (1.0 + 1e-12) + 1e-9)) + 1;
}

// Simulation --------------------------------------------------------------------

namespace {

/// Common shape of the per-step plant/controller pair.
class Plant {
 public:
  virtual ~Plant() = default;
  virtual Eigen::VectorXd state() const = 0;
  virtual Eigen::Vector2d output() const = 0;
  virtual Eigen::Vector2d prediction() const = 0;
  virtual Eigen::Vector2d rates(const Eigen::Vector2d& r_future) const = 0;
  virtual void step(const Eigen::Vector2d& rates, double dt) = 0;
  virtual bool near_singular() const { return false; }
};

class VehiclePlant final : public Plant {
 public:
  VehiclePlant(std::unique_ptr<FlatVehicleModel> model, Eigen::VectorXd z, ControllerKind controller, double alpha,
               double horizon)
      : model_(std::move(model)), z_(std::move(z)), controller_(controller), alpha_(alpha), horizon_(horizon) {}

  Eigen::VectorXd state() const override { return z_; }
  Eigen::Vector2d output() const override { return z_.head<2>(); }
  Eigen::Vector2d prediction() const override { return model_->predict(z_, horizon_); }

  Eigen::Vector2d rates(const Eigen::Vector2d& r_future) const override {
    switch (controller_) {
      case ControllerKind::nr_flat: return model_->flat_control(z_, r_future, alpha_, horizon_);
      case ControllerKind::nr_direct: return model_->direct_nr(z_, r_future, alpha_, horizon_);
      case ControllerKind::modified: {
        const FlatState f = model_->forward(z_);
        const TrivialFlatSpec spec{2, model_->flat_order(), horizon_, alpha_};
        return model_->inverse_rate(f, modified_flat_rate(f, r_future, spec));
      }
    }
    return {kNaN, kNaN};
  }

  void step(const Eigen::Vector2d& rates, double dt) override { z_ += dt * model_->dynamics(z_, rates); }
  bool near_singular() const override { return model_->near_singular(z_); }

  const FlatVehicleModel& model() const { return *model_; }

 private:
  std::unique_ptr<FlatVehicleModel> model_;
  Eigen::VectorXd z_;
  ControllerKind controller_;
  double alpha_;
  double horizon_;
};

class TrivialPlant final : public Plant {
 public:
  TrivialPlant(const TrivialFlatSpec& spec, FlatState state, ControllerKind controller)
      : spec_(spec), state_(std::move(state)), controller_(controller) {
    // The generic linear route, precomputed once: y_hat = C e^{AT} x + G u.
    const LinearSystem sys = trivial_abc(spec);
    const auto e = expm_and_integral(sys.a, spec.horizon);
    free_response_ = sys.c * e.exp;
    gain_ = sys.c * e.integral * sys.b;
    gain_inverse_ = gain_.inverse();
  }

  Eigen::VectorXd state() const override { return flat_vector(state_); }
  Eigen::Vector2d output() const override { return state_.y(); }
  Eigen::Vector2d prediction() const override { return trivial_predict(state_, spec_); }

  Eigen::Vector2d rates(const Eigen::Vector2d& r_future) const override {
    switch (controller_) {
      case ControllerKind::nr_flat: return nr_flat_rate(state_, r_future, spec_);
      case ControllerKind::nr_direct: {
        const Eigen::VectorXd y_hat = free_response_ * state_.stacked() + gain_ * state_.nu;
        return spec_.alpha * gain_inverse_ * (r_future - y_hat);
      }
      case ControllerKind::modified: return modified_flat_rate(state_, r_future, spec_);
    }
    return {kNaN, kNaN};
  }

  void step(const Eigen::Vector2d& rates, double dt) override { state_ = step_trivial(state_, rates, dt); }

 private:
  TrivialFlatSpec spec_;
  FlatState state_;
  ControllerKind controller_;
  Eigen::MatrixXd free_response_;
  Eigen::MatrixXd gain_;
  Eigen::MatrixXd gain_inverse_;
};

std::unique_ptr<Plant> make_plant(const ScenarioConfig& cfg, SimTrace& trace) {
  const double v_min = param_or(cfg.model_params, "v_min", kVMin);
  const auto& init = cfg.initial_state;
  switch (cfg.model) {
    case ModelKind::unicycle: {
      Eigen::VectorXd z(4);
      z << init[0], init[1], init[2], init.size() > 3 ? init[3] : 1.0;
      auto model = std::make_unique<UnicycleModel>(v_min);
      trace.state_names = model->state_names();
      trace.rate_names = model->rate_names();
      return std::make_unique<VehiclePlant>(std::move(model), z, cfg.controller, cfg.alpha, cfg.horizon);
    }
    case ModelKind::bicycle: {
      Eigen::VectorXd z(6);
      z << init[0], init[1], init[2], init.size() > 3 ? init[3] : 1.0, init.size() > 4 ? init[4] : 0.0,
          init.size() > 5 ? init[5] : 0.0;
      auto model = std::make_unique<BicycleModel>(param_or(cfg.model_params, "l", 2.0), v_min,
                                                  param_or(cfg.model_params, "steer_warn", kSteeringWarnAngle));
      trace.state_names = model->state_names();
      trace.rate_names = model->rate_names();
      return std::make_unique<VehiclePlant>(std::move(model), z, cfg.controller, cfg.alpha, cfg.horizon);
    }
    case ModelKind::trivial: {
      const int k = trivial_order(cfg);
      const TrivialFlatSpec spec{2, k, cfg.horizon, cfg.alpha};
      FlatState state = FlatState::zero(2, k);
      if (!init.empty())
        state = flat_from_vector(Eigen::Map<const Eigen::VectorXd>(init.data(), static_cast<Eigen::Index>(init.size())), k);
      for (int i = 0; i <= k; ++i)
        for (const char* axis : {"1", "2"})
          trace.state_names.push_back(i == 0 ? std::string("y") + axis
                                             : std::string("y") + axis + "_d" + std::to_string(i));
      trace.state_names.insert(trace.state_names.end(), {"nu1", "nu2"});
      trace.rate_names = {"nu1_dot", "nu2_dot"};
      return std::make_unique<TrivialPlant>(spec, std::move(state), cfg.controller);
    }
  }
  return nullptr;
}

}  // namespace

SimTrace run_scenario(const ScenarioConfig& cfg) {
  cfg.validate();
  const Reference reference(cfg.reference);

  SimTrace trace;
  trace.model = to_string(cfg.model);
  trace.dt = cfg.dt;
  trace.horizon = cfg.horizon;
  trace.expected_records = record_count(cfg.duration, cfg.dt);
  std::unique_ptr<Plant> plant = make_plant(cfg, trace);

  const std::size_t steps = trace.expected_records - 1;
  trace.records.reserve(trace.expected_records);
  bool warned = false;

  for (std::size_t i = 0; i <= steps; ++i) {
    TraceRecord rec;
    rec.t = static_cast<double>(i) * cfg.dt;
    rec.state = plant->state();
    rec.rates = rec.y = rec.r = rec.r_future = rec.y_pred = Eigen::Vector2d(kNaN, kNaN);
    rec.err = kNaN;
    std::optional<std::string> failure;
    try {
      if (!rec.state.allFinite()) throw NumericError("state is no longer finite");
      rec.y = plant->output();
      rec.r = reference(rec.t);
      rec.r_future = reference(rec.t + cfg.horizon);
      rec.err = (rec.r - rec.y).norm();
      rec.y_pred = plant->prediction();
      // A zero-length run records the initial condition only.
      if (steps > 0) {
        rec.rates = plant->rates(rec.r_future);
        if (!rec.rates.allFinite()) throw NumericError("controller produced non-finite rates");
      }
    } catch (const SingularityError& err) {
      failure = err.what();
    } catch (const DomainError& err) {
      failure = err.what();
    } catch (const NumericError& err) {
      failure = err.what();
    }
    if (failure) {
      trace.status = RunStatus::truncated_singular;
      std::ostringstream msg;
      msg << "t=" << rec.t << ": run truncated: " << *failure;
      trace.diagnostics.push_back(msg.str());
      trace.records.push_back(std::move(rec));
      break;
    }
    if (!warned && plant->near_singular()) {
      warned = true;
      std::ostringstream msg;
      msg << "t=" << rec.t << ": steering angle is within the near-singular band";
      trace.diagnostics.push_back(msg.str());
    }
    const Eigen::Vector2d rates = rec.rates;
    trace.records.push_back(std::move(rec));
    if (i < steps) plant->step(rates, cfg.dt);
  }
  return trace;
}

// Metrics ---------------------------------------------------------------------

std::optional<double> settling_time(const std::vector<double>& t, const std::vector<double>& err,
                                    double settle_fraction) {
  if (t.empty() || t.size() != err.size()) throw DomainError("settling_time: need matching, non-empty samples");
  const double band = settle_fraction * err.front();
  std::size_t last_out = t.size();
  for (std::size_t i = t.size(); i-- > 0;)
    if (!(err[i] <= band)) {
      last_out = i;
      break;
    }
  if (last_out == t.size()) return t.front();
  if (last_out + 1 == t.size()) return std::nullopt;
  return t[last_out + 1];
}

TraceMetrics compute_metrics(const SimTrace& trace, double settle_fraction) {
  if (trace.records.empty()) throw DomainError("compute_metrics: empty trace");
  TraceMetrics out;
  out.records = trace.records.size();
  out.status = trace.status;
  out.partial = trace.status != RunStatus::completed || trace.records.size() < trace.expected_records;

  // A truncated record may carry NaN outputs; metrics use the finite prefix.
  std::vector<double> t, err;
  for (const auto& rec : trace.records)
    if (std::isfinite(rec.err)) {
      t.push_back(rec.t);
      err.push_back(rec.err);
    }
  if (t.empty()) return out;

  out.initial_error = err.front();
  out.final_error = err.back();
  out.settling_time = settling_time(t, err, settle_fraction);
  if (out.settling_time) {
    double worst = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i)
      if (t[i] >= *out.settling_time) worst = std::max(worst, err[i]);
    out.max_error_after_settling = worst;
  }
  const double half = t.back() / 2;
  for (std::size_t i = 0; i < t.size(); ++i)
    if (t[i] >= half) out.steady_state_max_error = std::max(out.steady_state_max_error, err[i]);

  const std::size_t channels = trace.rate_names.size();
  out.rate_min.assign(channels, std::numeric_limits<double>::infinity());
  out.rate_max.assign(channels, -std::numeric_limits<double>::infinity());
  for (const auto& rec : trace.records)
    for (std::size_t c = 0; c < channels && c < 2; ++c)
      if (std::isfinite(rec.rates(static_cast<Eigen::Index>(c)))) {
        out.rate_min[c] = std::min(out.rate_min[c], rec.rates(static_cast<Eigen::Index>(c)));
        out.rate_max[c] = std::max(out.rate_max[c], rec.rates(static_cast<Eigen::Index>(c)));
      }
  return out;
}

double max_error_between(const SimTrace& trace, double t0, double t1) {
  double worst = 0.0;
  for (const auto& rec : trace.records)
    if (rec.t >= t0 && rec.t <= t1) {
      if (!std::isfinite(rec.err)) return kNaN;
      worst = std::max(worst, rec.err);
    }
  return worst;
}

}  // namespace flatrack
