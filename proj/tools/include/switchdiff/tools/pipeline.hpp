#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "switchdiff/ensemble.hpp"
#include "switchdiff/markov_chain.hpp"
#include "switchdiff/rates.hpp"
#include "switchdiff/stability.hpp"
#include "switchdiff/tools/scenario.hpp"

namespace switchdiff::tools {

/// Command-line values that replace scenario defaults.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> paths;
  std::optional<double> dt;
  std::optional<double> horizon;
  std::optional<Eigen::Index> truncation;
  std::optional<std::string> scheme;
  std::optional<double> h;
  /// One value scales the scenario's x0 direction to that norm; n values
  /// replace x0 outright.
  std::vector<double> x0;
};

void apply_overrides(Scenario& sc, const Overrides& ov);

/// Ball radius used by the stay/exit functionals: coupling/--h override,
/// then sim.stop_radius, then the Lyapunov domain radius, then 1.
double ball_radius(const Scenario& sc);

nlohmann::json provenance(const Scenario& sc);

/// Certificates only; no simulation.
struct AnalysisResult {
  TruncatedChain chain;
  InvariantMeasure nu;
  ErgodicityDiagnostic ergodicity;
  ScanCutoffs cutoffs;
  ModelCheck model_check;
  std::optional<BirthDeathMeasure> birth_death;
  std::optional<DriftConditionReport> drift;
  std::optional<MgScan> mg;
  KernelContinuityScan continuity;
  std::vector<CriterionReport> criteria;
  LinearizationData linearization;
  EigenCriterion eigen;
  nlohmann::json report;

  bool stable_certified() const;
  bool unstable_certified() const;
};

AnalysisResult analyze(const Scenario& sc);

struct SweepPoint {
  double delta = 0.0;
  FunctionalEstimate stay;
};

struct SimulationResult {
  EnsembleSummary summary;
  std::vector<SweepPoint> sweep;
  std::optional<double> selected_delta;
  nlohmann::json report;
};

/// Runs the ensemble at the scenario's x0 and, when `sweep` is set, the
/// delta sweep over |x0|. The selected delta is the largest one whose
/// stay_in_ball estimate exceeds 0.95 with a Wilson lower bound above 0.90.
SimulationResult simulate_scenario(const Scenario& sc, bool sweep, std::size_t keep_paths = 0);

struct RateResult {
  PathwiseRateEstimate estimate;
  std::size_t n_terminal = 0;
  double terminal_max = 0.0;     // of t^{1/gamma} V(X(T)) over surviving paths
  double terminal_median = 0.0;
  std::vector<std::string> warnings;
  nlohmann::json report;
};

RateResult verify_rate(const Scenario& sc);

struct CouplingResult {
  std::size_t n_paths = 0;
  std::size_t n_decoupled = 0;
  std::size_t n_exited = 0;
  double probability = 0.0;
  double sigma = 0.0;
  double bound = 0.0;  // T * sup Xi over |x| <= h, regimes <= K
  bool passes = false;
  nlohmann::json report;
};

CouplingResult coupled_test(const Scenario& sc);

/// Writes `report` as pretty JSON with a `partial` marker.
void write_report(const std::filesystem::path& path, nlohmann::json report, bool partial);

}  // namespace switchdiff::tools
