#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "switchdiff/model.hpp"
#include "switchdiff/rates.hpp"
#include "switchdiff/simulator.hpp"

namespace switchdiff {

/// A per-path statistic aggregated by run_ensemble.
struct Functional {
  enum class Kind { stay_in_ball, converges_to_zero, sup_ratio, occupation };

  Kind kind = Kind::stay_in_ball;
  double h = 0.0;        // ball radius (stay_in_ball, converges_to_zero)
  double tol = 0.0;      // converges_to_zero
  double T = 0.0;        // converges_to_zero, sup_ratio (0 = horizon)
  double lambda = 0.0;   // sup_ratio
  double T0 = 0.0;       // sup_ratio
  Regime regime = 1;     // occupation

  static Functional stay_in_ball(double h);
  static Functional converges_to_zero(double tol, double h, double T = 0.0);
  static Functional sup_ratio(double lambda, double T0, double T = 0.0);
  static Functional occupation(Regime i);

  std::string name() const;
  bool is_indicator() const noexcept { return kind != Kind::occupation; }
};

struct FunctionalEstimate {
  std::string functional;
  double estimate = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::string interval;  // "wilson" or "normal"
  std::size_t n_paths = 0;
  std::size_t n_blowups = 0;
  std::uint64_t seed = 0;
};

struct EnsembleOptions {
  std::size_t n_paths = 1;
  /// Worker threads; 0 reads SWITCHDIFF_THREADS, falling back to the
  /// hardware concurrency.
  unsigned threads = 0;
  bool keep_trajectories = false;
  std::uint64_t first_path_index = 0;
};

struct EnsembleSummary {
  std::vector<FunctionalEstimate> estimates;
  std::size_t n_paths = 0;
  std::size_t n_blowups = 0;
  std::size_t n_exited = 0;
  std::uint64_t seed = 0;
  std::vector<Trajectory> trajectories;  // filled when keep_trajectories
};

/// Threads requested through SWITCHDIFF_THREADS (or hardware concurrency).
unsigned configured_threads();

/// Wilson score interval at 95% for k successes out of n.
std::pair<double, double> wilson_interval(std::size_t successes, std::size_t n);

/// Value of a functional on one recorded path (1/0 for indicators).
double evaluate_functional(const Functional& f, const Trajectory& path, const SimConfig& config,
                           const LyapunovSpec* lyap);

/// Simulates n_paths independent paths (path i uses stream (seed, first + i))
/// and aggregates every functional. Results do not depend on the number of
/// threads or their scheduling.
EnsembleSummary run_ensemble(const ModelSpec& spec, const LyapunovSpec* lyap,
                             const SimConfig& config, const EnsembleOptions& options,
                             std::span<const Functional> functionals);

}  // namespace switchdiff
