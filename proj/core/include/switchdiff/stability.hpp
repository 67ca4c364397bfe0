#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "switchdiff/markov_chain.hpp"
#include "switchdiff/model.hpp"
#include "switchdiff/types.hpp"

namespace switchdiff {

enum class Sign { negative, positive, undetermined };
std::string to_string(Sign s);

struct MeanDrift {
  double value = 0.0;       // sum over resolved regimes of c_i nu_i
  double tail_bound = 0.0;  // bound * unresolved mass
  Sign sign = Sign::undetermined;
};

/// sum_i c_i nu_i with a certified sign: negative only if value + tail < 0,
/// positive only if value - tail > 0. `bound` bounds |c_i| over regimes
/// whose mass is unresolved.
MeanDrift mean_drift_criterion(const std::function<double(Regime)>& c, double bound,
                               const InvariantMeasure& nu);

enum class Theorem { T3_1, T3_2, T3_3, T3_5_ergodic, T3_5_strong };
std::string to_string(Theorem t);
Theorem parse_theorem(const std::string& name);

enum class HypothesisStatus { holds, fails, unchecked };
std::string to_string(HypothesisStatus s);

enum class Verdict { stable_certified, unstable_certified, inconclusive };
std::string to_string(Verdict v);

struct ScanCutoffs {
  Regime k_scan = 0;     // regimes scanned: 1..k_scan
  Regime tail_from = 0;  // limsup/liminf proxy over tail_from < i <= k_scan
  double radius = 0.0;   // spatial scans cover 0 < |x| <= radius
};

/// Scan cutoff K_scan = max(4 N, 100) and the fixed tail window start
/// K_default / 2 for a truncation of size N.
ScanCutoffs default_cutoffs(Eigen::Index n_trunc, double radius);

struct CriterionReport {
  Theorem theorem = Theorem::T3_2;
  MeanDrift mean_drift;
  double limsup_tail_c = 0.0;  // max c_i over the tail window
  double liminf_tail_c = 0.0;  // min c_i over the tail window
  std::vector<std::pair<std::string, HypothesisStatus>> hypotheses;
  Verdict verdict = Verdict::inconclusive;
  ScanCutoffs cutoffs;
  std::vector<std::string> notes;

  HypothesisStatus status(const std::string& name) const;
};

/// Grid evidence for sup_{0<|x|<h, i} |V_x sigma(x,i)| / g(V(x)) < infinity.
struct MgScan {
  double sup = 0.0;
  double small_radius_slope = 0.0;  // d log s / d log r over the smallest decade
  bool bounded = false;
};

MgScan scan_Mg(const ModelSpec& spec, const LyapunovSpec& lyap, const ScanCutoffs& cutoffs);

/// Grid evidence for sup_i sum_{j != i} |q_ij(x) - q_ij(0)| -> 0 as x -> 0.
struct KernelContinuityScan {
  std::vector<double> radii;   // decreasing
  std::vector<double> values;  // sup over regimes and directions at each radius
  bool vanishes = false;
};

KernelContinuityScan scan_kernel_continuity(const RateKernel& kernel, int dim,
                                            const ScanCutoffs& cutoffs);

/// Everything a theorem check may consume. Missing entries that a theorem
/// needs raise ConfigError listing the gap.
struct TheoremInputs {
  const InvariantMeasure* nu = nullptr;
  const ErgodicityDiagnostic* ergodicity = nullptr;
  const DriftConditionReport* drift = nullptr;
  const MgScan* mg = nullptr;
  const KernelContinuityScan* continuity = nullptr;
  std::function<double(Regime)> c;
  double c_bound = 0.0;
  bool g_is_identity = false;
  ScanCutoffs cutoffs;
};

CriterionReport check_theorem_hypotheses(Theorem which, const TheoremInputs& inputs);

struct LinearizationData {
  std::vector<Regime> regimes;
  std::vector<Matrix> drift;                   // b(i)
  std::vector<std::vector<Matrix>> diffusion;  // sigma_k(i), k = 1..d
  std::vector<double> Lambda1, lambda1;        // symmetric part of b(i)
  std::vector<std::vector<double>> Lambda2, lambda2;  // sigma_k sigma_k^T
  std::vector<double> probe_radii;
  std::vector<double> residuals;  // sup (|xi| v |zeta|) / |x| per probe radius
  bool exact = false;             // taken from the family's linear part
  bool residual_decreasing = false;
  std::vector<std::string> warnings;
};

/// Jacobians at the origin (exact for families with a linear part, central
/// differences otherwise) and the eigenvalue data built from them.
LinearizationData linearize(const ModelSpec& spec, std::span<const Regime> regimes,
                            std::span<const double> probe_radii);

/// Max/min eigenvalues of a symmetric matrix.
std::pair<double, double> symmetric_eig_range(const Matrix& m);

struct EigenCriterion {
  double stable_value = 0.0;    // sum nu_i (Lambda1_i + 1/2 sum_k Lambda2_ik)
  double unstable_value = 0.0;  // sum nu_i (lambda1_i + 1/2 sum_k lambda2_ik)
  double tail_bound = 0.0;
  Verdict verdict = Verdict::inconclusive;
  /// Same sums with eigenvalues of b(i) itself (real parts) instead of its
  /// symmetric part; reported for comparison only.
  double stable_value_raw = 0.0;
  double unstable_value_raw = 0.0;
};

EigenCriterion proposition41_criterion(const LinearizationData& data, const InvariantMeasure& nu);

}  // namespace switchdiff
