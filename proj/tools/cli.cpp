#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "flatrack/errors.hpp"
#include "flatrack/report.hpp"
#include "flatrack/stability.hpp"
#include "flatrack/vehicle_models.hpp"

namespace flatrack::cli {

using nlohmann::json;
namespace fs = std::filesystem;

// Config documents ---------------------------------------------------------------

namespace {

class DocumentReader {
 public:
  explicit DocumentReader(std::vector<std::string>& violations) : violations_(violations) {}

  void check_keys(const json& obj, const std::string& where, const std::set<std::string>& allowed) {
    for (const auto& [key, value] : obj.items())
      if (!allowed.count(key)) violations_.push_back(where + key + ": unknown key");
  }

  void number(const json& obj, const std::string& key, const std::string& where, double& target) {
    if (!obj.contains(key)) return;
    if (!obj[key].is_number())
      violations_.push_back(where + key + ": must be a number");
    else
      target = obj[key].get<double>();
  }

  template <typename Enum>
  void choice(const json& obj, const std::string& key, const std::string& where,
              const std::vector<std::pair<std::string, Enum>>& options, Enum& target, bool required) {
    if (!obj.contains(key)) {
      if (required) violations_.push_back(where + key + ": required");
      return;
    }
    std::string names;
    for (const auto& [name, value] : options) {
      names += (names.empty() ? "" : ", ") + name;
      if (obj[key].is_string() && obj[key].get<std::string>() == name) {
        target = value;
        return;
      }
    }
    violations_.push_back(where + key + ": must be one of " + names);
  }

  void number_map(const json& obj, const std::string& key, const std::string& where,
                  std::map<std::string, double>& target) {
    if (!obj.contains(key)) return;
    if (!obj[key].is_object()) {
      violations_.push_back(where + key + ": must be an object of numbers");
      return;
    }
    for (const auto& [name, value] : obj[key].items()) {
      if (value.is_number())
        target[name] = value.get<double>();
      else
        violations_.push_back(where + key + "." + name + ": must be a number");
    }
  }

 private:
  std::vector<std::string>& violations_;
};

}  // namespace

ConfigDocument parse_config(const std::string& text, const fs::path& base_dir) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError({std::string("config is not valid JSON: ") + e.what()});
  }
  if (!doc.is_object()) throw ValidationError({"config must be a JSON object"});

  std::vector<std::string> v;
  DocumentReader reader(v);
  ConfigDocument out;
  ScenarioConfig& cfg = out.scenario;

  reader.check_keys(doc, "", {"model", "controller", "alpha", "horizon_T", "dt", "duration", "reference",
                              "initial_state", "model_params", "settle_fraction", "out_dir"});
  reader.choice<ModelKind>(doc, "model", "",
                           {{"unicycle", ModelKind::unicycle}, {"bicycle", ModelKind::bicycle},
                            {"trivial", ModelKind::trivial}},
                           cfg.model, true);
  reader.choice<ControllerKind>(doc, "controller", "",
                                {{"nr_flat", ControllerKind::nr_flat}, {"nr_direct", ControllerKind::nr_direct},
                                 {"modified", ControllerKind::modified}},
                                cfg.controller, false);
  reader.number(doc, "alpha", "", cfg.alpha);
  reader.number(doc, "horizon_T", "", cfg.horizon);
  reader.number(doc, "dt", "", cfg.dt);
  reader.number(doc, "duration", "", cfg.duration);
  reader.number(doc, "settle_fraction", "", out.settle_fraction);
  if (!(out.settle_fraction > 0.0 && out.settle_fraction < 1.0)) v.push_back("settle_fraction: must lie in (0, 1)");
  reader.number_map(doc, "model_params", "", cfg.model_params);

  if (doc.contains("out_dir")) {
    if (doc["out_dir"].is_string())
      out.out_dir = doc["out_dir"].get<std::string>();
    else
      v.push_back("out_dir: must be a string");
  }

  if (doc.contains("initial_state")) {
    const json& init = doc["initial_state"];
    if (!init.is_array() || !std::all_of(init.begin(), init.end(), [](const json& x) { return x.is_number(); }))
      v.push_back("initial_state: must be an array of numbers");
    else
      cfg.initial_state = init.get<std::vector<double>>();
  }

  if (!doc.contains("reference")) {
    v.push_back("reference: required");
  } else if (!doc["reference"].is_object()) {
    v.push_back("reference: must be an object");
  } else {
    const json& ref = doc["reference"];
    reader.check_keys(ref, "reference.", {"kind", "parameters", "path", "interpolation"});
    reader.choice<ReferenceKind>(ref, "kind", "reference.",
                                 {{"sine", ReferenceKind::sine}, {"spiral", ReferenceKind::spiral},
                                  {"constant", ReferenceKind::constant}, {"file", ReferenceKind::file}},
                                 cfg.reference.kind, true);
    reader.number_map(ref, "parameters", "reference.", cfg.reference.parameters);
    reader.choice<Interpolation>(ref, "interpolation", "reference.",
                                 {{"linear", Interpolation::linear}, {"previous", Interpolation::previous}},
                                 cfg.reference.interpolation, false);
    if (ref.contains("path")) {
      if (!ref["path"].is_string()) {
        v.push_back("reference.path: must be a string");
      } else {
        fs::path p = ref["path"].get<std::string>();
        if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
        cfg.reference.path = p.string();
      }
    }
  }

  for (auto& msg : cfg.violations())
    if (std::find(v.begin(), v.end(), msg) == v.end()) v.push_back(std::move(msg));

  if (v.empty() && cfg.reference.kind == ReferenceKind::file) {
    try {
      Reference check(cfg.reference);
      (void)check;
    } catch (const Error& e) {
      v.push_back(std::string("reference: ") + e.what());
    }
  }
  if (!v.empty()) throw ValidationError(std::move(v));
  return out;
}

ConfigDocument load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError({"config " + path.string() + " cannot be read"});
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.parent_path());
}

// Commands ----------------------------------------------------------------------

namespace {

fs::path default_out_dir(const fs::path& config_path, const ConfigDocument& doc) {
  if (!doc.out_dir.empty()) return doc.out_dir;
  const char* root = std::getenv("FLATRACK_OUT_DIR");
  return fs::path(root && *root ? root : "out") / config_path.stem();
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

int cmd_simulate(const std::string& config_path, const std::string& out_flag, std::ostream& out, std::ostream& err) {
  ConfigDocument doc;
  try {
    doc = load_config(config_path);
  } catch (const ValidationError& e) {
    for (const auto& msg : e.violations()) err << "config error: " << msg << '\n';
    return kExitUsage;
  }

  const SimTrace trace = run_scenario(doc.scenario);
  const TraceMetrics metrics = compute_metrics(trace, doc.settle_fraction);

  const fs::path dir = out_flag.empty() ? default_out_dir(config_path, doc) : fs::path(out_flag);
  try {
    fs::create_directories(dir);
    std::ostringstream csv, svg;
    write_trace_csv(trace, csv);
    write_trajectory_svg(trace, svg);
    json summary = to_json(metrics, trace);
    summary["controller"] = to_string(doc.scenario.controller);
    summary["reference"] = to_string(doc.scenario.reference.kind);
    summary["alpha"] = doc.scenario.alpha;
    summary["settle_fraction"] = doc.settle_fraction;
    write_file(dir / "trace.csv", csv.str());
    write_file(dir / "summary.json", summary.dump(2) + "\n");
    write_file(dir / "trajectory.svg", svg.str());
  } catch (const std::exception& e) {
    err << "output error: " << e.what() << '\n';
    return kExitUsage;
  }

  out << "wrote " << (dir / "trace.csv").string() << ", summary.json, trajectory.svg (" << trace.records.size()
      << " records, " << to_string(trace.status) << ")\n";
  for (const auto& d : trace.diagnostics) err << d << '\n';
  return trace.status == RunStatus::completed ? kExitOk : kExitTruncated;
}

int cmd_stability(int k, int m, double horizon, double alpha, const std::vector<double>& gains, std::ostream& out,
                  std::ostream& err) {
  const TrivialFlatSpec spec{m, k, horizon, alpha};
  try {
    spec.validate();
  } catch (const Error& e) {
    err << "argument error: " << e.what() << '\n';
    return kExitUsage;
  }
  if (!gains.empty()) {
    if (gains.size() != static_cast<std::size_t>(k + 1)) {
      err << "argument error: --gains needs k+1 = " << k + 1 << " values\n";
      return kExitUsage;
    }
    if (!std::all_of(gains.begin(), gains.end(), [](double g) { return g > 0.0 && std::isfinite(g); })) {
      err << "argument error: --gains must be positive\n";
      return kExitUsage;
    }
  }

  json doc{{"k", k}, {"m", m}, {"T", horizon}, {"alpha", alpha}};
  StabilityCertificate cert;
  try {
    LinearSystem sys = trivial_abc(spec);
    if (!gains.empty()) sys.a = gain_assigned_a(spec, gains);
    const PAlphaDecomposition dec = generic_p_alpha_decomposition(sys, horizon);
    json p_list = json::array();
    for (const auto& p : dec.p_list) p_list.push_back(to_json(p));
    doc["generic"] = {{"p_list", p_list},
                      {"p_alpha", to_json(dec.evaluate(alpha))},
                      {"interpolation_residual", dec.interpolation_residual}};
    if (gains.empty()) {
      doc["path"] = "trivial";
      cert = certify(spec);
      doc["closed_form"] = {{"p_alpha_base", to_json(closed_form_p_alpha_base(spec))},
                            {"p_alpha", to_json(closed_form_p_alpha(spec))}};
    } else {
      doc["path"] = "gain_assigned";
      doc["gains"] = gains;
      cert = certify(sys, horizon);
      doc["closed_form"] = nullptr;
    }
  } catch (const Error& e) {
    err << "stability error: " << e.what() << '\n';
    return kExitUsage;
  }
  doc["agreement_residual"] = cert.closed_form_agreement ? json(*cert.closed_form_agreement) : json(nullptr);
  doc["certificate"] = to_json(cert);
  out << doc.dump(2) << '\n';
  return cert.alpha_stable_sufficient ? kExitOk : kExitNegative;
}

struct EquivalenceTolerances {
  double jacobian = kFdTolerance;
  double alpha_part = 1e-9;  // unicycle: flat and direct laws coincide
  double drift = kFdTolerance;
  double composition = 1e-8;
};

int cmd_equivalence(const std::string& model_name, int samples, std::uint64_t seed, std::ostream& out,
                    std::ostream& err) {
  if (samples < 0) {
    err << "argument error: --samples must be >= 0\n";
    return kExitUsage;
  }
  const bool unicycle = model_name == "unicycle";
  const double alpha = unicycle ? 100.0 : 30.0;
  const double horizon = unicycle ? 0.02 : 0.8;
  const double l = 2.0;
  std::unique_ptr<FlatVehicleModel> model;
  if (unicycle)
    model = std::make_unique<UnicycleModel>();
  else
    model = std::make_unique<BicycleModel>(l);
  const TrivialFlatSpec spec{2, model->flat_order(), horizon, alpha};

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> pos(-20.0, 20.0), heading(-std::numbers::pi, std::numbers::pi),
      speed(0.5, 5.0), steer(-1.2, 1.2), accel(-2.0, 2.0), offset(-5.0, 5.0);

  double worst_jacobian = 0.0, worst_alpha = 0.0, worst_drift = 0.0, worst_composition = 0.0;
  for (int i = 0; i < samples; ++i) {
    Eigen::VectorXd z(model->state_dim());
    if (unicycle)
      z << pos(rng), pos(rng), heading(rng), speed(rng);
    else
      z << pos(rng), pos(rng), heading(rng), speed(rng), steer(rng), accel(rng);
    const Eigen::Vector2d r_future = z.head<2>() + Eigen::Vector2d(offset(rng), offset(rng));

    const JacobianReport jac = jacobian_block_check(*model, z, horizon);
    worst_jacobian = std::max({worst_jacobian, jac.inverse_residual, jac.zero_block_residual, jac.chain_residual});

    const DecompositionReport dec = controller_decomposition_check(*model, z, r_future, alpha, horizon);
    worst_drift = std::max(worst_drift, dec.residual);
    const double scale = std::max(1.0, dec.flat_rates.cwiseAbs().maxCoeff());
    if (unicycle) worst_alpha = std::max(worst_alpha, (dec.flat_rates - dec.direct_rates).cwiseAbs().maxCoeff() / scale);

    const FlatState f = model->forward(z);
    const Eigen::Vector2d composed = model->inverse_rate(f, nr_flat_rate(f, r_future, spec));
    worst_composition = std::max(worst_composition, (composed - dec.flat_rates).cwiseAbs().maxCoeff() / scale);
  }

  const EquivalenceTolerances tol;
  const bool pass = worst_jacobian < tol.jacobian && worst_drift < tol.drift &&
                    worst_composition < tol.composition && (!unicycle || worst_alpha < tol.alpha_part);
  json report{
      {"model", model->name()},
      {"samples", samples},
      {"seed", seed},
      {"vacuous", samples == 0},
      {"alpha", alpha},
      {"T", horizon},
      {"max_jacobian_residual", worst_jacobian},
      {"max_drift_residual", worst_drift},
      {"max_composition_residual", worst_composition},
      {"tolerances",
       {{"jacobian", tol.jacobian}, {"drift", tol.drift}, {"composition", tol.composition}}},
      {"pass", pass},
  };
  if (unicycle) {
    report["max_alpha_part_residual"] = worst_alpha;
    report["tolerances"]["alpha_part"] = tol.alpha_part;
  }
  out << report.dump(2) << '\n';
  return pass ? kExitOk : kExitNegative;
}

int cmd_sweep(const std::string& config_path, const std::vector<double>& alphas, const std::vector<double>& horizons,
              int workers, const std::string& out_flag, std::ostream& out, std::ostream& err) {
  ConfigDocument doc;
  try {
    doc = load_config(config_path);
  } catch (const ValidationError& e) {
    for (const auto& msg : e.violations()) err << "config error: " << msg << '\n';
    return kExitUsage;
  }

  std::vector<ScenarioConfig> cells;
  for (double a : alphas.empty() ? std::vector<double>{doc.scenario.alpha} : alphas)
    for (double t : horizons.empty() ? std::vector<double>{doc.scenario.horizon} : horizons) {
      ScenarioConfig cfg = doc.scenario;
      cfg.alpha = a;
      cfg.horizon = t;
      if (const auto v = cfg.violations(); !v.empty()) {
        for (const auto& msg : v) err << "sweep cell alpha=" << a << " T=" << t << ": " << msg << '\n';
        return kExitUsage;
      }
      cells.push_back(std::move(cfg));
    }

  std::vector<TraceMetrics> results(cells.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++)
      results[i] = compute_metrics(run_scenario(cells[i]), doc.settle_fraction);
  };
  const int pool = std::clamp(workers, 1, static_cast<int>(std::max<std::size_t>(cells.size(), 1)));
  std::vector<std::thread> threads;
  for (int i = 1; i < pool; ++i) threads.emplace_back(work);
  work();
  for (auto& t : threads) t.join();

  std::ostringstream csv;
  csv << "alpha,T,status,records,settling_time,steady_state_max_error,final_error\n";
  auto fmt = [](double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", x);
    return std::string(buf);
  };
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto& m = results[i];
    csv << fmt(cells[i].alpha) << ',' << fmt(cells[i].horizon) << ',' << to_string(m.status) << ',' << m.records
        << ',' << (m.settling_time ? fmt(*m.settling_time) : "") << ',' << fmt(m.steady_state_max_error) << ','
        << fmt(m.final_error) << '\n';
  }

  const fs::path dir = out_flag.empty() ? default_out_dir(config_path, doc) : fs::path(out_flag);
  try {
    fs::create_directories(dir);
    write_file(dir / "sweep.csv", csv.str());
  } catch (const std::exception& e) {
    err << "output error: " << e.what() << '\n';
    return kExitUsage;
  }
  out << csv.str();
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Newton-Raphson flow tracking for differentially flat systems", "flatrack"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  auto* simulate = app.add_subcommand("simulate", "run a scenario config; writes trace.csv, summary.json, trajectory.svg");
  simulate->add_option("--config", config_path, "scenario JSON")->required();
  simulate->add_option("--out", out_dir, "output directory (default $FLATRACK_OUT_DIR/<config name>)");

  int k = 0, m = 1;
  double horizon = 1.0, alpha = 2.0;
  std::vector<double> gains;
  auto* stability = app.add_subcommand("stability", "certify alpha-stability of the trivial system");
  stability->add_option("--k", k, "derivative order (nu = y^(k+1))")->required();
  stability->add_option("--m", m, "flat output dimension")->required();
  stability->add_option("--T", horizon, "prediction horizon")->required();
  stability->add_option("--alpha", alpha, "speedup factor for the reported P_alpha")->capture_default_str();
  stability->add_option("--gains", gains, "K_1..K_{k+1} of a gain-assigned bottom row")->delimiter(',');

  std::string model_name;
  int samples = 100;
  std::uint64_t seed = 1;
  auto* equivalence = app.add_subcommand("equivalence", "flat vs direct NR controller checks on random states");
  equivalence->add_option("--model", model_name, "unicycle or bicycle")
      ->required()
      ->check(CLI::IsMember({"unicycle", "bicycle"}));
  equivalence->add_option("--samples", samples, "number of random states")->capture_default_str();
  equivalence->add_option("--seed", seed, "random seed")->capture_default_str();

  std::vector<double> alphas, horizons;
  int workers = 1;
  std::string sweep_config, sweep_out;
  auto* sweep = app.add_subcommand("sweep", "run a config over a grid of alpha and T values");
  sweep->add_option("--config", sweep_config, "base scenario JSON")->required();
  sweep->add_option("--alpha", alphas, "alpha values")->delimiter(',');
  sweep->add_option("--T", horizons, "horizon values")->delimiter(',');
  sweep->add_option("--workers", workers, "worker threads")->capture_default_str();
  sweep->add_option("--out", sweep_out, "output directory");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    // Help requests print to `out` and succeed; everything else is a usage error.
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  }

  if (simulate->parsed()) return cmd_simulate(config_path, out_dir, out, err);
  if (stability->parsed()) return cmd_stability(k, m, horizon, alpha, gains, out, err);
  if (equivalence->parsed()) return cmd_equivalence(model_name, samples, seed, out, err);
  return cmd_sweep(sweep_config, alphas, horizons, workers, sweep_out, out, err);
}

}  // namespace flatrack::cli
