#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "switchdiff/model.hpp"
#include "switchdiff/types.hpp"

namespace switchdiff {

enum class TruncationMode { drop, lump };

/// Finite N x N surrogate of the frozen generator Q(0) on states 1..N.
struct TruncatedChain {
  Matrix Q;
  bool lumped_tail = false;
  /// Largest off-truncation mass of any row that was discarded (drop mode).
  double truncation_leak = 0.0;
  /// Largest off-truncation mass of any row that was redirected to state N.
  double lumped_mass = 0.0;

  Eigen::Index size() const noexcept { return Q.rows(); }
};

/// Builds the truncation of Q(x) (x = 0 by default) on states 1..N.
TruncatedChain truncate(const RateKernel& kernel, Eigen::Index N,
                        TruncationMode mode = TruncationMode::lump,
                        std::optional<Vector> at = std::nullopt, int dim = 1);

/// Wraps an explicit generator matrix (finite chain, no truncation).
TruncatedChain exact_chain(Matrix Q);

/// True if every state reaches every other through positive rates.
bool is_irreducible(const Matrix& Q);

struct InvariantMeasure {
  Vector nu;
  double residual = 0.0;  // || nu Q ||_inf
  Eigen::Index truncation_size = 0;
  /// When set, the last entry stands for the lumped tail {N, N+1, ...}.
  bool lumped_tail = false;

  /// Mass not attributed to an individual regime: 1 - sum of the resolved
  /// entries (the lumped entry counts as unresolved).
  double unresolved_mass() const;
  /// Number of entries that belong to a single regime.
  Eigen::Index resolved_size() const noexcept {
    return lumped_tail ? nu.size() - 1 : nu.size();
  }
};

/// Solves nu Q = 0, sum nu = 1. Throws StructuralError on a reducible
/// truncation and NumericError when the solve misses its tolerance.
InvariantMeasure invariant_measure(const TruncatedChain& chain);

struct BirthDeathMeasure {
  InvariantMeasure measure;
  double nu_star = 0.0;             // sum_{k>=2} prod_{l=2}^k check_{l-1}/hat_l over K terms
  double tail_bound = 0.0;          // geometric bound on the neglected terms
  double printed_normalization_sum = 0.0;  // (1 + nu*) / nu*
  double cross_check_error = 0.0;   // max |nu - linear solve| on the same states
  std::string normalization;        // which normalization the returned measure uses
};

/// Product-form invariant measure of the birth-death chain with up-rates
/// check_p[i] (i -> i+1) and down-rates hat_p[i] (i -> i-1), 1-based in the
/// sense check_p[0] = check_p_1. Cross-validated against invariant_measure on
/// the same K states. Throws ErgodicityError if the product sum diverges.
BirthDeathMeasure birth_death_invariant(std::span<const double> check_p,
                                        std::span<const double> hat_p, Eigen::Index K);

/// P(t) = exp(Q t) by uniformization.
Matrix transition_matrix(const TruncatedChain& chain, double t);

struct ErgodicityDiagnostic {
  enum class Verdict { exponentially_ergodic, mixed, inconclusive };

  std::vector<double> times;
  std::vector<double> distance;  // d(t) = sup_i sum_j |p_ij(t) - nu_j|
  double C = 0.0;
  double lambda = 0.0;
  double r_squared = 0.0;
  std::size_t fit_points = 0;
  Verdict verdict = Verdict::inconclusive;
};

std::string to_string(ErgodicityDiagnostic::Verdict v);

/// d(t) over the grid and a least-squares fit of log d(t) = log C - lambda t
/// on the latter half. Throws ContractError for fewer than two grid points.
ErgodicityDiagnostic ergodicity_diagnostic(const TruncatedChain& chain,
                                           const InvariantMeasure& nu,
                                           std::span<const double> times);

std::vector<double> default_ergodicity_times();

struct PoissonSolution {
  Vector gamma;
  double residual = 0.0;    // || Q gamma - b ||_inf, b after projection
  double projection = 0.0;  // nu.b removed from b (0 if none)
};

/// Solves Q gamma = b with nu . gamma = 0. If nu . b is nonzero beyond 1e-10
/// the right-hand side is projected (b <- b - (nu b) 1) when `project` is set,
/// otherwise ContractError is thrown.
PoissonSolution solve_poisson(const TruncatedChain& chain, const InvariantMeasure& nu,
                              const Vector& b, bool project = true);

}  // namespace switchdiff
