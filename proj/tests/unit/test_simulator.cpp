#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "flatrack/errors.hpp"
#include "flatrack/report.hpp"
#include "flatrack/simulator.hpp"

using namespace flatrack;

namespace {

constexpr double kPi = std::numbers::pi;

ScenarioConfig unicycle_sine(double duration = 100.0) {
  ScenarioConfig cfg;
  cfg.model = ModelKind::unicycle;
  cfg.alpha = 100;
  cfg.horizon = 0.02;
  cfg.dt = 1e-3;
  cfg.duration = duration;
  cfg.reference.kind = ReferenceKind::sine;
  cfg.initial_state = {12, -4, kPi / 2, 1};
  return cfg;
}

ScenarioConfig trivial_modified(int k, double alpha) {
  ScenarioConfig cfg;
  cfg.model = ModelKind::trivial;
  cfg.controller = ControllerKind::modified;
  cfg.alpha = alpha;
  cfg.horizon = 0.5;
  cfg.dt = 1e-4;
  cfg.duration = 0.5;
  cfg.reference.kind = ReferenceKind::constant;
  cfg.reference.parameters = {{"x", 1.0}, {"y", -2.0}};
  cfg.model_params = {{"k", k}};
  return cfg;
}

// Least-squares slope of log|r(t+T) - y_pred| against t.
double prediction_error_slope(const SimTrace& trace) {
  double n = 0, st = 0, sl = 0, stt = 0, stl = 0;
  for (const auto& rec : trace.records) {
    const double e = (rec.r_future - rec.y_pred).norm();
    if (!(e > 0) || !std::isfinite(e)) continue;
    const double l = std::log(e);
    n += 1;
    st += rec.t;
    sl += l;
    stt += rec.t * rec.t;
    stl += rec.t * l;
  }
  return (n * stl - st * sl) / (n * stt - st * st);
}

std::string csv_of(const SimTrace& trace) {
  std::ostringstream out;
  write_trace_csv(trace, out);
  return out.str();
}

}  // namespace

TEST_SUITE("simulator") {
  TEST_CASE("eval_reference examples") {
    ReferenceSpec sine;
    sine.kind = ReferenceKind::sine;
    CHECK(eval_reference(sine, 0.0).norm() == 0.0);
    const Eigen::Vector2d quarter = eval_reference(sine, 12.5);
    CHECK(quarter.x() == doctest::Approx(2.5));
    CHECK(quarter.y() == doctest::Approx(10.0));

    ReferenceSpec spiral;
    spiral.kind = ReferenceKind::spiral;
    const Eigen::Vector2d origin = eval_reference(spiral, 284.0);
    CHECK(origin.x() == doctest::Approx(1.0));
    CHECK(std::abs(origin.y()) < 1e-15);
    // Lookahead past the run end extrapolates analytically.
    CHECK(std::isfinite(eval_reference(spiral, 100.02).x()));

    ReferenceSpec constant;
    constant.kind = ReferenceKind::constant;
    constant.parameters = {{"x", 3}, {"y", 4}};
    CHECK(eval_reference(constant, 17.0) == Eigen::Vector2d(3, 4));
  }

  TEST_CASE("file references interpolate, clamp and reject early lookups") {
    const auto path = std::filesystem::temp_directory_path() / "flatrack_ref_test.csv";
    {
      std::ofstream f(path);
      f << "t,x,y\n0,0,0\n1,2,4\n3,2,0\n";
    }
    ReferenceSpec spec;
    spec.kind = ReferenceKind::file;
    spec.path = path.string();
    CHECK(spec.violations().empty());
    const Reference ref(spec);
    CHECK((ref(0.5) - Eigen::Vector2d(1, 2)).norm() < 1e-15);
    CHECK((ref(2.0) - Eigen::Vector2d(2, 2)).norm() < 1e-15);
    CHECK(ref(10.0) == Eigen::Vector2d(2, 0));
    CHECK_THROWS_AS(ref(-0.1), DomainError);

    spec.interpolation = Interpolation::previous;
    CHECK(Reference(spec)(0.99) == Eigen::Vector2d(0, 0));

    {
      std::ofstream f(path);
      f << "0,0,0\n1,1,1\n1,2,2\n";
    }
    CHECK_THROWS_AS(Reference{spec}, DomainError);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(Reference{spec}, DomainError);
  }

  TEST_CASE("validation lists every violation") {
    ScenarioConfig cfg = unicycle_sine();
    CHECK(cfg.violations().empty());
    cfg.dt = 0;
    cfg.alpha = 1;
    cfg.horizon = -1;
    const auto v = cfg.violations();
    CHECK(v.size() == 3);
    try {
      cfg.validate();
      FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("dt") != std::string::npos);
      CHECK(msg.find("alpha") != std::string::npos);
    }
    CHECK_THROWS_AS(run_scenario(cfg), ValidationError);

    ScenarioConfig bad = unicycle_sine();
    bad.initial_state = {1, 2};
    bad.model_params = {{"l", 2.0}};
    CHECK(bad.violations().size() == 2);
  }

  TEST_CASE("record_count") {
    CHECK(record_count(100, 1e-3) == 100001);
    CHECK(record_count(0.3, 0.1) == 4);
    CHECK(record_count(0, 1e-3) == 1);
    CHECK(record_count(0.25, 0.1) == 3);
  }

  TEST_CASE("zero-duration run records one state and never calls the controller") {
    ScenarioConfig cfg = unicycle_sine(0.0);
    const SimTrace trace = run_scenario(cfg);
    REQUIRE(trace.records.size() == 1);
    CHECK(trace.status == RunStatus::completed);
    CHECK(std::isnan(trace.records[0].rates(0)));
    CHECK(trace.records[0].err == doctest::Approx(std::hypot(12.0, 4.0)));
  }

  TEST_CASE("trace shape") {
    const SimTrace trace = run_scenario(unicycle_sine(1.0));
    CHECK(trace.records.size() == 1001);
    CHECK(trace.expected_records == 1001);
    CHECK(trace.state_names == std::vector<std::string>{"px", "py", "theta", "v"});
    for (std::size_t i = 0; i < trace.records.size(); ++i) CHECK(trace.records[i].t == doctest::Approx(i * 1e-3));
  }

  TEST_CASE("trivial modified controller decays at rate alpha") {
    for (int k : {0, 1}) {
      const SimTrace trace = run_scenario(trivial_modified(k, 10.0));
      CHECK(trace.status == RunStatus::completed);
      const double slope = prediction_error_slope(trace);
      CHECK(std::abs(slope + 10.0) / 10.0 < 0.02);
    }
  }

  TEST_CASE("determinism") {
    const std::string a = csv_of(run_scenario(unicycle_sine(5.0)));
    const std::string b = csv_of(run_scenario(unicycle_sine(5.0)));
    CHECK(a == b);
  }

  TEST_CASE("dt refinement is first order") {
    std::vector<Eigen::Vector2d> finals;
    for (double dt : {1e-3, 5e-4, 2.5e-4}) {
      ScenarioConfig cfg = unicycle_sine(10.0);
      cfg.dt = dt;
      const SimTrace trace = run_scenario(cfg);
      REQUIRE(trace.status == RunStatus::completed);
      finals.push_back(trace.records.back().y);
    }
    const double ratio = (finals[0] - finals[1]).norm() / (finals[1] - finals[2]).norm();
    MESSAGE("refinement ratio " << ratio);
    CHECK(ratio >= 1.5);
    CHECK(ratio <= 2.5);
  }

  TEST_CASE("unicycle nr_flat and nr_direct coincide") {
    ScenarioConfig cfg = unicycle_sine(100.0);
    const SimTrace flat = run_scenario(cfg);
    cfg.controller = ControllerKind::nr_direct;
    const SimTrace direct = run_scenario(cfg);
    REQUIRE(flat.records.size() == direct.records.size());
    double worst = 0;
    for (std::size_t i = 0; i < flat.records.size(); ++i)
      worst = std::max(worst, (flat.records[i].state - direct.records[i].state).cwiseAbs().maxCoeff());
    CHECK(worst < 1e-6);
  }

  TEST_CASE("bicycle at v = 0 truncates with a diagnostic") {
    ScenarioConfig cfg;
    cfg.model = ModelKind::bicycle;
    cfg.alpha = 30;
    cfg.horizon = 0.8;
    cfg.duration = 1.0;
    cfg.initial_state = {0, 0, 0, 0, 0, 0};
    const SimTrace trace = run_scenario(cfg);
    CHECK(trace.status == RunStatus::truncated_singular);
    CHECK(trace.records.size() == 1);
    REQUIRE_FALSE(trace.diagnostics.empty());
    CHECK(trace.diagnostics.back().find("truncated") != std::string::npos);
    const TraceMetrics m = compute_metrics(trace);
    CHECK(m.partial);
    CHECK(m.status == RunStatus::truncated_singular);
  }

  TEST_CASE("settling_time examples") {
    std::vector<double> t, e;
    const double dt = 1e-3;
    for (int i = 0; i <= 10000; ++i) {
      t.push_back(i * dt);
      e.push_back(std::exp(-i * dt));
    }
    const auto ts = settling_time(t, e, 0.05);
    REQUIRE(ts);
    CHECK(std::abs(*ts - std::log(20.0)) <= dt);
    CHECK(std::abs(*ts - 3.0) <= 0.01);

    std::fill(e.begin(), e.end(), 0.0);
    CHECK(settling_time(t, e, 0.05) == std::optional<double>(0.0));

    std::vector<double> rising(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) rising[i] = 1.0 + t[i];
    CHECK_FALSE(settling_time(t, rising, 0.05));
  }

  TEST_CASE("compute_metrics") {
    CHECK_THROWS_AS(compute_metrics(SimTrace{}), DomainError);
    const SimTrace trace = run_scenario(unicycle_sine(40.0));
    const TraceMetrics m = compute_metrics(trace, 0.02);
    CHECK_FALSE(m.partial);
    CHECK(m.records == trace.records.size());
    REQUIRE(m.settling_time);
    CHECK(*m.settling_time < 5.0);
    CHECK(m.steady_state_max_error < 1e-3);
    CHECK(m.rate_min.size() == 2);
    CHECK(m.rate_min[0] <= m.rate_max[0]);
    CHECK(max_error_between(trace, 20, 40) <= m.steady_state_max_error + 1e-15);
  }

  TEST_CASE("CSV format") {
    const SimTrace trace = run_scenario(unicycle_sine(0.002));
    const std::string csv = csv_of(trace);
    std::istringstream in(csv);
    std::string header, row;
    std::getline(in, header);
    CHECK(header == "t,px,py,theta,v,v_dot,omega,rx,ry,yx,yy,err");
    std::getline(in, row);
    CHECK(row.rfind("0,12,-4,1.57079633,1,", 0) == 0);
    int lines = 1;
    while (std::getline(in, row)) ++lines;
    CHECK(lines == 3);

    ScenarioConfig triv = trivial_modified(1, 10.0);
    triv.duration = 0.0;
    std::istringstream tin(csv_of(run_scenario(triv)));
    std::getline(tin, header);
    CHECK(header == "t,y1,y2,y1_d1,y2_d1,nu1,nu2,nu1_dot,nu2_dot,rx,ry,yx,yy,err");
  }

  TEST_CASE("summary JSON") {
    const SimTrace trace = run_scenario(unicycle_sine(1.0));
    const auto j = to_json(compute_metrics(trace), trace);
    CHECK(j.contains("settling_time"));
    CHECK(j.contains("steady_state_max_error"));
    CHECK(j.at("status") == "completed");
  }

  TEST_CASE("SVG has both strokes and heading arrows") {
    const SimTrace trace = run_scenario(unicycle_sine(5.0));
    std::ostringstream out;
    write_trajectory_svg(trace, out);
    const std::string svg = out.str();
    CHECK(svg.rfind("<svg", 0) == 0);
    std::size_t polylines = 0;
    for (auto pos = svg.find("<polyline"); pos != std::string::npos; pos = svg.find("<polyline", pos + 1)) ++polylines;
    CHECK(polylines >= 2);
    CHECK(svg.find("red") != std::string::npos);
    CHECK(svg.find("blue") != std::string::npos);
  }
}
