#pragma once

#include <json.hpp>

#include <ostream>

#include "flatrack/simulator.hpp"
#include "flatrack/stability.hpp"
#include "flatrack/vehicle_models.hpp"

namespace flatrack {

/// Coefficients ascending, roots as [re, im] pairs, non-finite numbers as null.
nlohmann::json to_json(const Polynomiald& p);
nlohmann::json to_json(const RootReport& report);
nlohmann::json to_json(const StabilityCertificate& cert);
nlohmann::json to_json(const TraceMetrics& metrics, const SimTrace& trace);
nlohmann::json to_json(const JacobianReport& report);

/// Header `t,<state cols>,<rate cols>,rx,ry,yx,yy,err`; 9 significant digits.
void write_trace_csv(const SimTrace& trace, std::ostream& out);

/// Reference (red) and path (blue) polylines with heading arrows every
/// `arrow_interval` seconds.
void write_trajectory_svg(const SimTrace& trace, std::ostream& out, double arrow_interval = 1.0);

}  // namespace flatrack
