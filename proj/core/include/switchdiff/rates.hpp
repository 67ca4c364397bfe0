#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "switchdiff/types.hpp"

namespace switchdiff {

struct Trajectory;

/// Growth profile g bounding the drift of V, together with the upper limit h
/// of the integral G(y) = -int_y^h dz / g(z).
///
/// Built-in kinds have closed forms for G and its inverse; custom profiles
/// fall back to adaptive quadrature and bisection.
class RateProfile {
 public:
  enum class Kind { identity, power_1_plus_gamma, custom };

  static RateProfile identity(double h = 1.0);
  static RateProfile power(double gamma, double h = 1.0);
  static RateProfile custom(std::function<double(double)> g, double h = 1.0,
                            std::string label = "custom");

  Kind kind() const noexcept { return kind_; }
  double h() const noexcept { return h_; }
  double gamma() const noexcept { return gamma_; }
  const std::string& label() const noexcept { return label_; }

  double g(double y) const;

  /// G(y) for 0 < y <= h. Non-positive, increasing, G(h) = 0.
  double G(double y) const;

  /// Same integral by adaptive quadrature, regardless of kind.
  double G_quadrature(double y) const;

  /// y in (0, h] with G(y) = -t, for t >= 0.
  double G_inverse(double t) const;

  /// G^{-1}(-t) by bisection on G, regardless of kind.
  double G_inverse_bisection(double t) const;

  /// The 1/gamma-free form h^-gamma - y^-gamma for power profiles; reported
  /// next to G, never used for computation. Empty for other kinds.
  std::optional<double> G_unscaled_convention(double y) const;

  /// Sampled check of the family requirements: g(0) = 0 and g strictly
  /// increasing on 512 points of [0, 1]. Returns a description of the first
  /// violation, or nothing.
  std::optional<std::string> check_family() const;

  /// Below this argument, custom-profile G is reported as -infinity.
  static constexpr double kQuadratureFloor = 1e-12;

 private:
  RateProfile(Kind kind, double h, double gamma, std::function<double(double)> g,
              std::string label);

  Kind kind_;
  double h_;
  double gamma_;
  std::function<double(double)> g_;
  std::string label_;
};

/// Log-spaced candidate decay rates, 64 points on [1e-4, 1e2].
std::vector<double> default_lambda_grid();

struct RateCurvePoint {
  double lambda;
  double quantile;  // (1 - epsilon)-quantile of R(lambda) over surviving paths
  std::size_t n_surviving;
};

struct PathwiseRateEstimate {
  double lambda_hat = 0.0;        // 0 when no candidate qualifies
  double resolution = 0.0;        // grid ratio at lambda_hat
  bool found = false;
  std::size_t n_paths = 0;
  std::size_t n_surviving = 0;
  std::size_t n_excluded = 0;     // exited B_h or blew up
  double T0 = 0.0;
  double T = 0.0;
  std::vector<RateCurvePoint> curve;
};

/// Largest lambda on the grid whose (1 - epsilon)-quantile of
/// R(lambda) = sup_{t in [T0, T]} V(X(t)) / G^{-1}(-lambda t) is at most 1.
///
/// Paths flagged as exited or blown up are excluded and counted. T is the
/// common horizon (smallest final time among surviving paths); T0 defaults
/// to T / 4. Throws EstimationError when no path survives.
PathwiseRateEstimate estimate_pathwise_rate(
    std::span<const Trajectory> paths, const std::function<double(const Vector&)>& V,
    const RateProfile& profile, std::optional<double> T0, double epsilon,
    std::span<const double> lambda_grid = {});

}  // namespace switchdiff
