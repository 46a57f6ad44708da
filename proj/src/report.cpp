#include "flatrack/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>

namespace flatrack {

namespace {

nlohmann::json number(double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr); }

template <typename T>
nlohmann::json optional_number(const std::optional<T>& x) {
  return x ? number(*x) : nlohmann::json(nullptr);
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", x);
  return buf;
}

}  // namespace

nlohmann::json to_json(const Polynomiald& p) {
  nlohmann::json out = nlohmann::json::array();
  for (int i = 0; i <= p.degree(); ++i) out.push_back(number(p.coeff(i)));
  return out;
}

nlohmann::json to_json(const RootReport& report) {
  nlohmann::json roots = nlohmann::json::array();
  for (const auto& r : report.roots) roots.push_back({number(r.real()), number(r.imag())});
  return {{"roots", roots}, {"max_real_part", number(report.max_real_part)}, {"hurwitz", report.hurwitz}};
}

nlohmann::json to_json(const StabilityCertificate& cert) {
  nlohmann::json tilde = nlohmann::json::array();
  for (const auto& p : cert.p_tilde) tilde.push_back(to_json(p));
  return {
      {"n", cert.n},
      {"m", cert.m},
      {"T", cert.horizon},
      {"p_alpha_base", cert.p_alpha_base ? to_json(*cert.p_alpha_base) : nlohmann::json(nullptr)},
      {"p0", to_json(cert.p0)},
      {"p_tilde", tilde},
      {"q", to_json(cert.q)},
      {"p0_hurwitz", cert.p0_hurwitz},
      {"q_hurwitz", cert.q_hurwitz},
      {"alpha_stable_sufficient", cert.alpha_stable_sufficient},
      {"roots_p0", to_json(cert.roots_p0)},
      {"roots_q", to_json(cert.roots_q)},
      {"interpolation_residual", number(cert.interpolation_residual)},
      {"closed_form_agreement", optional_number(cert.closed_form_agreement)},
  };
}

nlohmann::json to_json(const TraceMetrics& metrics, const SimTrace& trace) {
  nlohmann::json rates = nlohmann::json::object();
  for (std::size_t c = 0; c < trace.rate_names.size() && c < metrics.rate_min.size(); ++c)
    rates[trace.rate_names[c]] = {{"min", number(metrics.rate_min[c])}, {"max", number(metrics.rate_max[c])}};
  return {
      {"model", trace.model},
      {"status", to_string(metrics.status)},
      {"partial", metrics.partial},
      {"records", metrics.records},
      {"expected_records", trace.expected_records},
      {"dt", trace.dt},
      {"T", trace.horizon},
      {"initial_error", number(metrics.initial_error)},
      {"final_error", number(metrics.final_error)},
      {"settling_time", optional_number(metrics.settling_time)},
      {"max_error_after_settling", optional_number(metrics.max_error_after_settling)},
      {"steady_state_max_error", number(metrics.steady_state_max_error)},
      {"rate_extrema", rates},
      {"diagnostics", trace.diagnostics},
  };
}

nlohmann::json to_json(const JacobianReport& report) {
  return {{"inverse_residual", number(report.inverse_residual)},
          {"zero_block_residual", number(report.zero_block_residual)},
          {"chain_residual", number(report.chain_residual)}};
}

void write_trace_csv(const SimTrace& trace, std::ostream& out) {
  out << "t";
  for (const auto& name : trace.state_names) out << ',' << name;
  for (const auto& name : trace.rate_names) out << ',' << name;
  out << ",rx,ry,yx,yy,err\n";
  std::string line;
  for (const auto& rec : trace.records) {
    line = fmt(rec.t);
    for (Eigen::Index i = 0; i < rec.state.size(); ++i) line += ',' + fmt(rec.state(i));
    for (Eigen::Index i = 0; i < rec.rates.size(); ++i) line += ',' + fmt(rec.rates(i));
    line += ',' + fmt(rec.r.x()) + ',' + fmt(rec.r.y()) + ',' + fmt(rec.y.x()) + ',' + fmt(rec.y.y()) + ',' +
            fmt(rec.err) + '\n';
    out << line;
  }
}

namespace {

constexpr double kWidth = 800.0;
constexpr double kHeight = 600.0;
constexpr double kMargin = 40.0;
constexpr std::size_t kMaxPolylinePoints = 4000;

struct Frame {
  double x0, y0, scale;
  double sx(double x) const { return kMargin + (x - x0) * scale; }
  double sy(double y) const { return kHeight - kMargin - (y - y0) * scale; }
};

/// Heading of a record: theta for vehicles, direction of y' otherwise.
double heading_of(const SimTrace& trace, const TraceRecord& rec) {
  const auto it = std::find(trace.state_names.begin(), trace.state_names.end(), "theta");
  if (it != trace.state_names.end()) return rec.state(it - trace.state_names.begin());
  return std::atan2(rec.state(3), rec.state(2));
}

void polyline(std::ostream& out, const SimTrace& trace, const Frame& frame, bool reference, const char* colour) {
  const std::size_t n = trace.records.size();
  const std::size_t stride = std::max<std::size_t>(1, n / kMaxPolylinePoints);
  out << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\" points=\"";
  auto emit = [&](const TraceRecord& rec) {
    const Eigen::Vector2d& p = reference ? rec.r : rec.y;
    if (p.allFinite()) out << fmt(frame.sx(p.x())) << ',' << fmt(frame.sy(p.y())) << ' ';
  };
  for (std::size_t i = 0; i < n; i += stride) emit(trace.records[i]);
  if (n > 0 && (n - 1) % stride != 0) emit(trace.records.back());
  out << "\"/>\n";
}

}  // namespace

void write_trajectory_svg(const SimTrace& trace, std::ostream& out, double arrow_interval) {
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin, ymin = xmin, ymax = -xmin;
  for (const auto& rec : trace.records)
    for (const Eigen::Vector2d& p : {rec.r, rec.y})
      if (p.allFinite()) {
        xmin = std::min(xmin, p.x());
        xmax = std::max(xmax, p.x());
        ymin = std::min(ymin, p.y());
        ymax = std::max(ymax, p.y());
      }
  if (!std::isfinite(xmin)) xmin = xmax = ymin = ymax = 0.0;
  const double span = std::max({xmax - xmin, (ymax - ymin) * (kWidth - 2 * kMargin) / (kHeight - 2 * kMargin), 1e-9});
  const double scale = (kWidth - 2 * kMargin) / span;
  const Frame frame{xmin, ymin, scale};

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << kMargin << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">" << trace.model
      << ": reference (red), path (blue), heading every " << fmt(arrow_interval) << " s</text>\n";
  polyline(out, trace, frame, true, "red");
  polyline(out, trace, frame, false, "blue");

  if (arrow_interval > 0.0 && trace.dt > 0.0) {
    const auto every = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(arrow_interval / trace.dt)));
    const double len = 12.0;
    for (std::size_t i = 0; i < trace.records.size(); i += every) {
      const auto& rec = trace.records[i];
      if (!rec.y.allFinite() || !rec.state.allFinite()) continue;
      const double th = heading_of(trace, rec);
      // SVG y grows downward, so the screen angle is -theta.
      const double x = frame.sx(rec.y.x()), y = frame.sy(rec.y.y());
      const double tx = x + len * std::cos(th), ty = y - len * std::sin(th);
      const double back = 5.0, wing = 0.45;
      out << "<line x1=\"" << fmt(x) << "\" y1=\"" << fmt(y) << "\" x2=\"" << fmt(tx) << "\" y2=\"" << fmt(ty)
          << "\" stroke=\"black\" stroke-width=\"1\"/>";
      out << "<polygon fill=\"black\" points=\"" << fmt(tx) << ',' << fmt(ty) << ' '
          << fmt(tx - back * std::cos(th - wing)) << ',' << fmt(ty + back * std::sin(th - wing)) << ' '
          << fmt(tx - back * std::cos(th + wing)) << ',' << fmt(ty + back * std::sin(th + wing)) << "\"/>\n";
    }
  }
  out << "</svg>\n";
}

}  // namespace flatrack
