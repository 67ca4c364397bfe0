#include <catch_amalgamated.hpp>

#include <cmath>
#include <limits>

#include "switchdiff/errors.hpp"
#include "switchdiff/rates.hpp"
#include "switchdiff/simulator.hpp"

using namespace switchdiff;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("identity profile has logarithmic G", "[rates]") {
  const auto p = RateProfile::identity(0.5);
  CHECK(p.G(0.5) == 0.0);
  CHECK_THAT(p.G(0.05), WithinRel(std::log(0.1), 1e-14));
  CHECK_THAT(p.G_inverse(2.0), WithinRel(0.5 * std::exp(-2.0), 1e-14));
  CHECK_THAT(p.G_quadrature(0.05), WithinRel(std::log(0.1), 1e-10));
}

TEST_CASE("power profile uses the 1/gamma normalization", "[rates]") {
  const double gamma = 0.5, h = 1.0;
  const auto p = RateProfile::power(gamma, h);
  // -int_y^1 z^{-3/2} dz = 2 (1 - y^{-1/2})
  CHECK_THAT(p.G(0.25), WithinRel(2.0 * (1.0 - 2.0), 1e-14));
  CHECK_THAT(*p.G_unscaled_convention(0.25), WithinRel(1.0 - 2.0, 1e-14));
  CHECK_THAT(p.G_inverse(2.0), WithinRel(0.25, 1e-14));
  CHECK_THAT(p.G_inverse_bisection(2.0), WithinRel(0.25, 1e-10));
  CHECK_FALSE(RateProfile::identity().G_unscaled_convention(0.5));
}

TEST_CASE("G is increasing and vanishes at h", "[rates]") {
  for (const auto& p : {RateProfile::identity(0.7), RateProfile::power(0.25, 0.7),
                        RateProfile::custom([](double y) { return y + y * y; }, 0.7)}) {
    double prev = -std::numeric_limits<double>::infinity();
    for (int k = 60; k >= 0; --k) {
      const double y = 0.7 * std::pow(10.0, -k / 10.0);
      const double G = p.G(y);
      CHECK(G <= 0.0);
      CHECK(G > prev);
      prev = G;
    }
    CHECK(p.G(0.7) == 0.0);
  }
}

TEST_CASE("custom profile inverts by bisection", "[rates]") {
  const auto p = RateProfile::custom([](double y) { return y * (1.0 + y); }, 1.0);
  for (double t : {0.0, 0.1, 1.0, 10.0, 25.0}) {
    const double y = p.G_inverse(t);
    CHECK_THAT(p.G(y), WithinAbs(-t, 1e-10 * std::max(1.0, t)));
  }
}

TEST_CASE("G rejects arguments outside (0, h]", "[rates]") {
  const auto p = RateProfile::identity(1.0);
  CHECK_THROWS_AS(p.G(0.0), DomainError);
  CHECK_THROWS_AS(p.G(1.5), DomainError);
  CHECK_THROWS_AS(p.G_inverse(-1.0), DomainError);
  CHECK_THROWS_AS(RateProfile::power(1.5), ConfigError);
}

TEST_CASE("profile family check", "[rates]") {
  CHECK_FALSE(RateProfile::power(0.5).check_family());
  CHECK(RateProfile::custom([](double y) { return 1.0 + y; }).check_family());
  CHECK(RateProfile::custom([](double y) { return y * (1.0 - y); }).check_family());
}

TEST_CASE("default lambda grid is log-spaced over six decades", "[rates]") {
  const auto g = default_lambda_grid();
  REQUIRE(g.size() == 64);
  CHECK_THAT(g.front(), WithinRel(1e-4, 1e-12));
  CHECK_THAT(g.back(), WithinRel(1e2, 1e-12));
  CHECK_THAT(g[1] / g[0], WithinRel(g[40] / g[39], 1e-10));
}

namespace {

// Path with V(X(t)) = e^{-rate t} on a fine grid, dimension 1.
Trajectory decaying_path(double rate, double T, double dt) {
  Trajectory p;
  p.dim = 1;
  for (double t = 0.0; t <= T + 1e-12; t += dt) {
    p.times.push_back(t);
    p.states.push_back(std::exp(-0.5 * rate * t));
    p.regimes.push_back(1);
  }
  p.end_time = p.times.back();
  return p;
}

}  // namespace

TEST_CASE("pathwise rate recovers an exact exponential decay", "[rates]") {
  // V = x^2 = e^{-2 t}; identity profile with h = 1 gives G^{-1}(-l t) = e^{-l t}.
  std::vector<Trajectory> paths(10, decaying_path(2.0, 5.0, 1e-2));
  const auto V = [](const Vector& x) { return x.squaredNorm(); };
  const auto est = estimate_pathwise_rate(paths, V, RateProfile::identity(1.0), 1.0, 0.05);
  REQUIRE(est.found);
  CHECK(est.lambda_hat <= 2.0);
  CHECK(est.lambda_hat * est.resolution > 2.0);
  CHECK(est.n_surviving == 10);
  CHECK(est.curve.size() == 64);
}

TEST_CASE("pathwise rate excludes exited paths and needs survivors", "[rates]") {
  std::vector<Trajectory> paths(4, decaying_path(1.0, 2.0, 1e-2));
  paths[0].exited = true;
  paths[1].blown_up = true;
  const auto V = [](const Vector& x) { return x.squaredNorm(); };
  const auto est = estimate_pathwise_rate(paths, V, RateProfile::identity(1.0), std::nullopt, 0.05);
  CHECK(est.n_excluded == 2);
  CHECK(est.n_surviving == 2);
  CHECK_THAT(est.T0, WithinRel(0.5, 1e-9));

  paths[2].exited = paths[3].exited = true;
  CHECK_THROWS_AS(estimate_pathwise_rate(paths, V, RateProfile::identity(1.0), std::nullopt, 0.05),
                  EstimationError);
}
