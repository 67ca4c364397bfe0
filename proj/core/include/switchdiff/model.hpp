#pragma once

#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "switchdiff/rates.hpp"
#include "switchdiff/types.hpp"

namespace switchdiff {

/// One off-diagonal entry q_ij(x) of a generator row.
struct RateEntry {
  Regime target;
  double rate;
};

using RateRow = std::vector<RateEntry>;

/// Lazily evaluated switching generator x -> Q(x).
///
/// A row is produced on demand for a single (x, i) and must have finite
/// support; kernels with genuinely infinite rows are expected to be truncated
/// by the caller to tail mass below kRowTailTolerance. The diagonal is
/// implied: q_ii(x) = -sum_{j != i} q_ij(x).
class RateKernel {
 public:
  using RowFn = std::function<void(const Vector& x, Regime i, RateRow& out)>;

  static constexpr double kRowTailTolerance = 1e-12;

  RateKernel() = default;
  RateKernel(RowFn row, std::optional<double> global_bound,
             std::function<double(double)> local_bound = {}, bool state_independent = false);

  /// Fills `out` with the off-diagonal entries of row i at x, sorted by target.
  void row(const Vector& x, Regime i, RateRow& out) const;
  RateRow row(const Vector& x, Regime i) const;

  /// q_i(x) = sum of the off-diagonal row.
  double total_rate(const Vector& x, Regime i) const;

  const std::optional<double>& global_bound() const noexcept { return global_bound_; }

  /// M_H: bound on q_i(x) over |x| <= H. Falls back to the global bound.
  std::optional<double> local_bound(double radius) const;

  /// True when Q(x) == Q(0) for every x.
  bool state_independent() const noexcept { return state_independent_; }

  explicit operator bool() const noexcept { return static_cast<bool>(row_); }

 private:
  RowFn row_;
  std::optional<double> global_bound_;
  std::function<double(double)> local_bound_;
  bool state_independent_ = false;
};

/// Exact linear part of a coefficient family: b(x,i) = B(i) x and column k of
/// sigma(x,i) equal to S_k(i) x. Attached by families that are linear near 0.
struct LinearPart {
  std::function<Matrix(Regime)> drift;
  std::function<std::vector<Matrix>(Regime)> diffusion;  // d matrices n x n
};

/// The hybrid system dX = b(X, a) dt + sigma(X, a) dW with switching law Q(x).
struct ModelSpec {
  using DriftFn = std::function<void(const Vector& x, Regime i, Vector& out)>;
  using DiffusionFn = std::function<void(const Vector& x, Regime i, Matrix& out)>;

  int dim = 1;
  int noise_dim = 1;
  DriftFn drift;
  DiffusionFn diffusion;
  RateKernel rate_kernel;
  bool zero_fixed = true;
  std::optional<LinearPart> linear;
  std::string family;

  Vector eval_drift(const Vector& x, Regime i) const;
  Matrix eval_diffusion(const Vector& x, Regime i) const;
};

/// Switching-independent Lyapunov function V with the drift bound
/// L_i V(x) <= c_i g(V(x)) on the ball of radius domain_radius.
struct LyapunovSpec {
  std::function<double(const Vector&)> V;
  std::function<Vector(const Vector&)> grad_V;  // optional
  std::function<Matrix(const Vector&)> hess_V;  // optional
  RateProfile g = RateProfile::identity();
  std::function<double(Regime)> c;
  double c_bound = 0.0;
  double domain_radius = 1.0;
  std::string family;
};

LyapunovSpec square_lyapunov();
LyapunovSpec power_lyapunov(double p);

/// Central-difference step for fallback derivatives.
double fd_step(const Vector& x);
Vector fd_gradient(const std::function<double(const Vector&)>& f, const Vector& x);
Matrix fd_hessian(const std::function<double(const Vector&)>& f, const Vector& x);

Vector gradient_of(const LyapunovSpec& lyap, const Vector& x);
Matrix hessian_of(const LyapunovSpec& lyap, const Vector& x);

/// L_i V(x) = grad V(x) . b(x,i) + 1/2 tr(hess V(x) sigma sigma^T(x,i)).
/// Throws DomainError at x = 0 and EvaluationError on non-finite terms.
double apply_generator_Li(const ModelSpec& spec, const LyapunovSpec& lyap, const Vector& x,
                          Regime i);

/// Full switching-diffusion generator applied to a regime-dependent f(x, i):
/// the diffusion part plus sum_{j != i} q_ij(x) [f(x,j) - f(x,i)].
double apply_full_generator(const ModelSpec& spec,
                            const std::function<double(const Vector&, Regime)>& f,
                            const Vector& x, Regime i);

struct GridPoint {
  Vector x;
  Regime i;
};

enum class DriftDirection { upper, lower };

struct DriftViolation {
  Vector x;
  Regime i;
  double residual;  // signed so that positive means violation
};

struct DriftConditionReport {
  DriftDirection direction = DriftDirection::upper;
  std::vector<DriftViolation> violations;
  double max_residual = -std::numeric_limits<double>::infinity();
  std::size_t n_checked = 0;
  double tolerance = 0.0;
  bool holds() const noexcept { return violations.empty(); }
};

constexpr double kDriftTolerance = 1e-9;

/// Checks L_i V(x) <= c_i g(V(x)) (or >= for DriftDirection::lower, the
/// instability form) on every grid point.
DriftConditionReport verify_drift_condition(const ModelSpec& spec, const LyapunovSpec& lyap,
                                            std::span<const GridPoint> grid,
                                            DriftDirection direction = DriftDirection::upper,
                                            double tolerance = kDriftTolerance);

/// Points on rays through the coordinate axes and diagonals at radii
/// log-spaced in [radius * 10^-decades, radius], for regimes 1..max_regime.
std::vector<GridPoint> radial_grid(int dim, double radius, Regime max_regime,
                                   int points_per_ray = 24, double decades = 4.0,
                                   bool both_signs = true);

/// Unit directions used by the radial scans.
std::vector<Vector> probe_directions(int dim);

struct ModelCheck {
  std::vector<std::string> problems;
  double max_row_sum_error = 0.0;
  bool ok() const noexcept { return problems.empty(); }
};

/// Sampled validation of the standing assumptions: b(0,i) = 0 and
/// sigma(0,i) = 0 when zero_fixed, finite coefficients, non-negative rates,
/// q_i(x) within the declared bound.
ModelCheck validate_model(const ModelSpec& spec, std::span<const GridPoint> grid);

/// Sampled check of V(0) = 0, V > 0 elsewhere and |c_i| <= c_bound.
ModelCheck validate_lyapunov(const LyapunovSpec& lyap, std::span<const GridPoint> grid);

}  // namespace switchdiff
