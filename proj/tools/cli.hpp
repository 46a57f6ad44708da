#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "flatrack/simulator.hpp"

namespace flatrack::cli {

/// Exit codes shared by every command.
enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,      ///< bad arguments or configuration
  kExitTruncated = 2,  ///< simulation stopped at a singular state
  kExitNegative = 3,   ///< stability not certified / equivalence check failed
};

/// A scenario document: ScenarioConfig plus output settings.
struct ConfigDocument {
  ScenarioConfig scenario;
  double settle_fraction = kDefaultSettleFraction;
  std::string out_dir;  ///< empty when the document does not name one
};

/// Parses and validates a config; relative reference paths resolve against
/// `base_dir`. Throws ValidationError listing every problem.
ConfigDocument parse_config(const std::string& text, const std::filesystem::path& base_dir = {});
ConfigDocument load_config(const std::filesystem::path& path);

/// Entry point; `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace flatrack::cli
