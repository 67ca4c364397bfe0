#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "switchdiff/model.hpp"
#include "switchdiff/types.hpp"

namespace switchdiff {

enum class SwitchScheme { per_step_thinning, exponential_proposals };

std::string to_string(SwitchScheme s);
SwitchScheme parse_switch_scheme(const std::string& name);

/// Largest admissible q_i(x) * dt for a single thinning decision.
constexpr double kThinningGuard = 0.1;
/// |X| above this (or non-finite X) terminates a path as a blow-up.
constexpr double kBlowupThreshold = 1e12;

struct SimConfig {
  double dt = 1e-3;
  double horizon = 1.0;
  std::uint64_t seed = 0;
  std::uint64_t path_index = 0;
  SwitchScheme scheme = SwitchScheme::per_step_thinning;
  std::optional<double> stop_radius;  // h for tau_h
  bool stop_at_exit = false;          // end the path at tau_h
  std::size_t record_stride = 1;
  Vector x0;
  Regime i0 = 1;

  /// Throws ConfigError when the configuration is inconsistent.
  void validate(int dim) const;
};

struct Jump {
  double time;
  Regime from;
  Regime to;
};

/// A recorded sample path of (X, alpha).
struct Trajectory {
  int dim = 0;
  std::vector<double> times;
  std::vector<double> states;  // row-major, dim entries per recorded time
  std::vector<Regime> regimes;
  std::vector<Jump> jumps;
  std::optional<double> tau_h;
  bool exited = false;
  bool blown_up = false;
  /// sup |X(t)| over every simulation step, not only recorded ones.
  double max_norm = 0.0;
  double end_time = 0.0;

  std::size_t size() const noexcept { return times.size(); }
  Vector state(std::size_t k) const;
  Vector final_state() const { return state(times.size() - 1); }

  /// Fraction of [0, end_time] spent in regime i, from the jump log.
  double occupation(Regime i, Regime initial) const;
};

/// Deterministic per-path random stream derived from (seed, path_index).
///
/// Draw order within a simulation step is fixed: the d Gaussian increments
/// first, then the switching uniforms.
class PathRng {
 public:
  PathRng(std::uint64_t seed, std::uint64_t path_index);

  double uniform();
  double normal() { return normal_(engine_); }
  double exponential(double rate);

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
};

/// Diffusion sub-step: x + b(x,i) dt + sigma(x,i) noise, noise ~ N(0, dt I).
Vector step(const ModelSpec& spec, const Vector& x, Regime i, double dt, const Vector& noise);

/// One thinning decision over dt: jump with probability q_i(x) dt, target
/// located by u_select * q_i(x) in the consecutive intervals of the row.
/// Throws GuardError if q_i(x) dt exceeds kThinningGuard.
Regime switch_step(const RateKernel& kernel, const Vector& x, Regime i, double dt,
                   double u_accept, double u_select);

/// Target for a jump out of a row, u_select in [0, 1).
Regime select_target(const RateRow& row, double total, double u_select);

/// Simulates one path on the dt grid; see SwitchScheme for the switching
/// construction. Blow-ups end the path with `blown_up` set.
Trajectory simulate(const ModelSpec& spec, const SimConfig& config);

struct CoupledResult {
  bool decoupled = false;
  std::optional<double> vartheta;  // first time alpha != frozen-chain copy
  std::optional<double> tau_h;
  Trajectory path;                 // X and the state-dependent alpha
  std::vector<Jump> frozen_jumps;  // jumps of the Q(0) copy
};

/// Simulates (X, alpha, alpha_hat) under the basic coupling of Q(X) and Q(0)
/// started from alpha = alpha_hat = i0, up to min(vartheta, tau_h, T) when
/// stop_at_decoupling is set, else to min(tau_h, T).
CoupledResult simulate_coupled(const ModelSpec& spec, const SimConfig& config,
                               bool stop_at_decoupling = true);

/// Xi(x, k) = sum_j |q_kj(x) - q_kj(0)|.
double coupling_discrepancy(const RateKernel& kernel, const Vector& x, Regime k);

/// sup of Xi over |x| <= h (radial probe grid) and regimes 1..K.
double sup_coupling_discrepancy(const RateKernel& kernel, int dim, double h, Regime K);

}  // namespace switchdiff
