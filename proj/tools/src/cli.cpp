#include "switchdiff/tools/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "switchdiff/export.hpp"
#include "switchdiff/tools/pipeline.hpp"

namespace switchdiff::tools {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Common {
  std::string scenario;
  std::string preset;
  std::string out;
  Overrides ov;
  std::uint64_t seed = 0;
  std::size_t paths = 0;
  double dt = 0.0, horizon = 0.0, h = 0.0;
  Eigen::Index truncation = 0;
  std::string scheme;
  std::string x0;
};

void add_common(CLI::App* cmd, Common& c, bool with_source = true) {
  cmd->set_help_flag("--help", "Print this help message and exit");
  if (with_source) {
    auto* s = cmd->add_option("--scenario", c.scenario, "Scenario file (JSON)");
    auto* p = cmd->add_option("--preset", c.preset, "Bundled scenario name");
    s->excludes(p);
  }
  cmd->add_option("--out", c.out, "Output directory");
  cmd->add_option("--seed", c.seed, "Master seed");
  cmd->add_option("--paths", c.paths, "Number of Monte Carlo paths");
  cmd->add_option("--dt", c.dt, "Euler step");
  cmd->add_option("--horizon", c.horizon, "Simulation horizon T");
  cmd->add_option("--truncation", c.truncation, "Truncation size N");
  cmd->add_option("--scheme", c.scheme, "per_step_thinning | exponential_proposals");
  cmd->add_option("--h", c.h, "Ball radius for exit/stay functionals");
  cmd->add_option("--x0", c.x0, "Initial point: a norm, or comma-separated coordinates");
}

Overrides collect(CLI::App* cmd, const Common& c) {
  Overrides ov;
  if (cmd->count("--seed")) ov.seed = c.seed;
  if (cmd->count("--paths")) ov.paths = c.paths;
  if (cmd->count("--dt")) ov.dt = c.dt;
  if (cmd->count("--horizon")) ov.horizon = c.horizon;
  if (cmd->count("--truncation")) ov.truncation = c.truncation;
  if (cmd->count("--scheme")) ov.scheme = c.scheme;
  if (cmd->count("--h")) ov.h = c.h;
  if (cmd->count("--x0")) {
    std::stringstream ss(c.x0);
    std::string item;
    while (std::getline(ss, item, ',')) {
      try {
        std::size_t used = 0;
        ov.x0.push_back(std::stod(item, &used));
        if (used != item.size()) throw std::invalid_argument(item);
      } catch (const std::exception&) {
        throw ConfigError("--x0: cannot parse '" + item + "'");
      }
    }
  }
  return ov;
}

Scenario load(CLI::App* cmd, const Common& c) {
  Scenario sc;
  if (!c.scenario.empty()) {
    sc = load_scenario(c.scenario);
  } else if (!c.preset.empty()) {
    sc = load_preset(c.preset);
  } else {
    throw ConfigError("one of --scenario or --preset is required");
  }
  apply_overrides(sc, collect(cmd, c));
  return sc;
}

fs::path out_dir(const Common& c, const Scenario& sc) {
  return c.out.empty() ? fs::path(sc.outputs) : fs::path(c.out);
}

// Runs a stage; on failure writes what exists with partial: true.
template <class F>
int staged(const fs::path& report_path, json& report, F&& body) {
  try {
    body();
  } catch (const std::exception& e) {
    report["error"] = e.what();
    try {
      write_report(report_path, report, true);
    } catch (const std::exception&) {
    }
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  write_report(report_path, report, false);
  return 0;
}

int do_analyze(const Scenario& sc, const fs::path& dir) {
  json report = {{"command", "analyze"}, {"provenance", provenance(sc)}};
  return staged(dir / "analysis.json", report, [&] {
    auto r = analyze(sc);
    report = r.report;
    std::ostringstream q, nu;
    write_matrix_csv(q, r.chain.Q);
    write_measure_csv(nu, r.nu);
    write_text_file(dir / "Q.csv", q.str());
    write_text_file(dir / "nu.csv", nu.str());
    report["artifacts"] = {"Q.csv", "nu.csv"};
    std::cout << sc.name << ": ";
    for (const auto& c : r.criteria) std::cout << to_string(c.theorem) << "=" << to_string(c.verdict) << " ";
    std::cout << "prop41=" << to_string(r.eigen.verdict) << "\n";
  });
}

int do_simulate(const Scenario& sc, const fs::path& dir, std::size_t write_paths, bool sweep) {
  json report = {{"command", "simulate"}, {"provenance", provenance(sc)}};
  return staged(dir / "summary.json", report, [&] {
    auto r = simulate_scenario(sc, sweep, write_paths);
    report = r.report;
    json files = json::array();
    for (std::size_t k = 0; k < r.summary.trajectories.size(); ++k) {
      char name[32];
      std::snprintf(name, sizeof name, "path_%06zu.csv", k);
      std::ostringstream os;
      write_trajectory_csv(os, r.summary.trajectories[k]);
      write_text_file(dir / "paths" / name, os.str());
      files.push_back(std::string("paths/") + name);
    }
    report["artifacts"] = files;
    for (const auto& e : r.summary.estimates) {
      std::cout << e.functional << ": " << e.estimate << " [" << e.ci_low << ", " << e.ci_high << "]\n";
    }
    if (r.selected_delta) std::cout << "selected delta: " << *r.selected_delta << "\n";
  });
}

int do_verify_rate(const Scenario& sc, const fs::path& dir) {
  json report = {{"command", "verify-rate"}, {"provenance", provenance(sc)}};
  return staged(dir / "rate.json", report, [&] {
    auto r = verify_rate(sc);
    report = r.report;
    std::ostringstream os;
    write_quantile_curve_csv(os, r.estimate);
    write_text_file(dir / "quantile_curve.csv", os.str());
    report["artifacts"] = {"quantile_curve.csv"};
    for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
    std::cout << "lambda_hat: " << r.estimate.lambda_hat << " (surviving " << r.estimate.n_surviving
              << " of " << r.estimate.n_paths << ")\n";
    if (!r.estimate.found) throw EstimationError("no lambda on the grid satisfies the quantile bound");
  });
}

int do_coupled(const Scenario& sc, const fs::path& dir) {
  json report = {{"command", "coupled-test"}, {"provenance", provenance(sc)}};
  return staged(dir / "coupling.json", report, [&] {
    auto r = coupled_test(sc);
    report = r.report;
    std::cout << "decoupling probability " << r.probability << " vs bound " << r.bound << " + 3*"
              << r.sigma << ": " << (r.passes ? "within" : "EXCEEDS") << "\n";
  });
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Regime-switching diffusion simulator and stability analyzer", "switchdiff"};
  app.require_subcommand(1);
  app.set_help_flag("--help", "Print this help message and exit");
  app.set_version_flag("--version", SWITCHDIFF_VERSION_STRING);

  Common c;
  std::size_t write_paths = 1;
  bool sweep = false;
  std::vector<std::string> names;
  bool list = false;

  auto* analyze_cmd = app.add_subcommand("analyze", "Chain diagnostics and stability certificates");
  add_common(analyze_cmd, c);
  auto* sim_cmd = app.add_subcommand("simulate", "Monte Carlo ensemble and trajectory export");
  add_common(sim_cmd, c);
  sim_cmd->add_option("--write-paths", write_paths, "Trajectories written as CSV");
  sim_cmd->add_flag("--sweep", sweep, "Also run the delta sweep over |x0|");
  auto* rate_cmd = app.add_subcommand("verify-rate", "Empirical pathwise convergence rate");
  add_common(rate_cmd, c);
  auto* repro_cmd = app.add_subcommand("reproduce", "Run the bundled presets end to end");
  add_common(repro_cmd, c, false);
  repro_cmd->add_option("names", names, "Preset names (default: all)");
  repro_cmd->add_flag("--list", list, "List bundled presets");
  auto* coupled_cmd = app.add_subcommand("coupled-test", "Decoupling probability vs its bound");
  add_common(coupled_cmd, c);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (analyze_cmd->parsed()) {
      const auto sc = load(analyze_cmd, c);
      return do_analyze(sc, out_dir(c, sc));
    }
    if (sim_cmd->parsed()) {
      const auto sc = load(sim_cmd, c);
      return do_simulate(sc, out_dir(c, sc), write_paths, sweep);
    }
    if (rate_cmd->parsed()) {
      const auto sc = load(rate_cmd, c);
      return do_verify_rate(sc, out_dir(c, sc));
    }
    if (coupled_cmd->parsed()) {
      const auto sc = load(coupled_cmd, c);
      return do_coupled(sc, out_dir(c, sc));
    }
    if (repro_cmd->parsed()) {
      if (list) {
        for (const auto& n : preset_names()) std::cout << n << "\n";
        return 0;
      }
      if (names.empty()) names = preset_names();
      const fs::path root = c.out.empty() ? fs::path("out") : fs::path(c.out);
      int status = 0;
      for (const auto& n : names) {
        Scenario sc = load_preset(n);
        apply_overrides(sc, collect(repro_cmd, c));
        const fs::path dir = root / n;
        status |= do_analyze(sc, dir);
        status |= do_simulate(sc, dir, 1, !sc.delta_sweep.empty());
        if (sc.has_lyapunov && sc.direction == DriftDirection::upper) status |= do_verify_rate(sc, dir);
        if (sc.document["kernel"].value("family", "") == "example52_q") status |= do_coupled(sc, dir);
      }
      return status;
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace switchdiff::tools
