#include <catch_amalgamated.hpp>

#include <cmath>

#include "oracles.hpp"
#include "switchdiff/errors.hpp"
#include "switchdiff/simulator.hpp"

using namespace switchdiff;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

ModelSpec switching_only(double q12, double q21, std::optional<double> bound) {
  ModelSpec m;
  m.dim = 1;
  m.noise_dim = 1;
  m.drift = [](const Vector& x, Regime, Vector& out) { out = Vector::Zero(x.size()); };
  m.diffusion = [](const Vector&, Regime, Matrix& out) { out = Matrix::Zero(1, 1); };
  m.rate_kernel = RateKernel(
      [=](const Vector&, Regime i, RateRow& out) {
        out.clear();
        out.push_back({i == 1 ? 2 : 1, i == 1 ? q12 : q21});
      },
      bound, {}, true);
  return m;
}

ModelSpec ou(double a, double s) {
  ModelSpec m;
  m.dim = 1;
  m.noise_dim = 1;
  m.drift = [a](const Vector& x, Regime, Vector& out) { out = a * x; };
  m.diffusion = [s](const Vector&, Regime, Matrix& out) { out = Matrix::Constant(1, 1, s); };
  m.zero_fixed = false;
  m.rate_kernel = RateKernel([](const Vector&, Regime, RateRow& out) { out.clear(); }, 0.0, {}, true);
  return m;
}

SimConfig config(double dt, double T, double x0, std::uint64_t seed = 1) {
  SimConfig c;
  c.dt = dt;
  c.horizon = T;
  c.seed = seed;
  c.x0 = Vector::Constant(1, x0);
  return c;
}

}  // namespace

TEST_CASE("configuration validation", "[simulator]") {
  auto c = config(1e-2, 1.0, 0.1);
  CHECK_NOTHROW(c.validate(1));
  CHECK_THROWS_AS(c.validate(2), ConfigError);
  c.dt = 2.0;
  CHECK_THROWS_AS(c.validate(1), ConfigError);
  c = config(1e-2, 1.0, 0.1);
  c.i0 = 0;
  CHECK_THROWS_AS(c.validate(1), ConfigError);
  CHECK_THROWS_AS(parse_switch_scheme("poisson"), ConfigError);
  CHECK(parse_switch_scheme(to_string(SwitchScheme::exponential_proposals)) ==
        SwitchScheme::exponential_proposals);
}

TEST_CASE("target selection follows the consecutive intervals", "[simulator]") {
  const RateRow row{{2, 1.0}, {3, 2.0}, {7, 1.0}};
  CHECK(select_target(row, 4.0, 0.0) == 2);
  CHECK(select_target(row, 4.0, 0.249) == 2);
  CHECK(select_target(row, 4.0, 0.25) == 3);
  CHECK(select_target(row, 4.0, 0.74) == 3);
  CHECK(select_target(row, 4.0, 0.99) == 7);
  CHECK(select_target(row, 4.0, 1.0) == 7);
  CHECK_THROWS_AS(select_target(RateRow{}, 0.0, 0.5), ContractError);
}

TEST_CASE("switch step accepts with probability q dt and guards coarse steps", "[simulator]") {
  const auto m = switching_only(2.0, 1.0, 2.0);
  const Vector x = Vector::Zero(1);
  CHECK(switch_step(m.rate_kernel, x, 1, 0.01, 0.019, 0.5) == 2);
  CHECK(switch_step(m.rate_kernel, x, 1, 0.01, 0.021, 0.5) == 1);
  CHECK_THROWS_AS(switch_step(m.rate_kernel, x, 1, 0.1, 0.0, 0.5), GuardError);
}

TEST_CASE("Euler step of a linear system", "[simulator]") {
  const auto m = ou(-2.0, 0.5);
  const Vector x = Vector::Constant(1, 1.0);
  const Vector out = step(m, x, 1, 0.1, Vector::Constant(1, 0.2));
  CHECK_THAT(out(0), WithinAbs(1.0 - 0.2 + 0.1, 1e-15));
  CHECK_THROWS_AS(step(m, x, 1, 0.1, Vector::Zero(2)), ContractError);
}

TEST_CASE("recorded grid hits the horizon exactly", "[simulator]") {
  auto c = config(0.3, 1.0, 1.0);
  c.record_stride = 2;
  const auto p = simulate(ou(-1.0, 0.0), c);
  REQUIRE(p.size() >= 2);
  CHECK(p.times.front() == 0.0);
  CHECK(p.times.back() == 1.0);
  CHECK(p.end_time == 1.0);
  // Steps of 0.3, 0.3, 0.3, 0.1 on a deterministic decay.
  CHECK_THAT(p.final_state()(0), WithinRel(0.7 * 0.7 * 0.7 * 0.9, 1e-14));
}

TEST_CASE("same seed and path index give the same path", "[simulator]") {
  auto c = config(1e-3, 1.0, 0.5, 42);
  const auto a = simulate(ou(-1.0, 0.3), c);
  const auto b = simulate(ou(-1.0, 0.3), c);
  CHECK(a.states == b.states);
  c.path_index = 1;
  const auto d = simulate(ou(-1.0, 0.3), c);
  CHECK(a.states != d.states);
}

TEST_CASE("exit time and stop at exit", "[simulator]") {
  auto c = config(1e-2, 5.0, 0.1);
  c.stop_radius = 1.0;
  auto grow = ou(1.0, 0.0);
  auto p = simulate(grow, c);
  REQUIRE(p.tau_h);
  CHECK(p.exited);
  // 0.1 (1.01)^k >= 1 first at k = 232.
  CHECK_THAT(*p.tau_h, WithinAbs(2.32, 1e-9));
  CHECK(p.end_time == 5.0);

  c.stop_at_exit = true;
  p = simulate(grow, c);
  CHECK_THAT(p.end_time, WithinAbs(2.32, 1e-9));
  CHECK(p.times.back() == p.end_time);
}

TEST_CASE("blow-up terminates the path", "[simulator]") {
  auto c = config(0.1, 100.0, 1.0);
  const auto p = simulate(ou(100.0, 0.0), c);
  CHECK(p.blown_up);
  CHECK(p.end_time < 100.0);
}

TEST_CASE("exponential proposals need a global bound", "[simulator]") {
  auto c = config(1e-2, 1.0, 0.1);
  c.scheme = SwitchScheme::exponential_proposals;
  CHECK_THROWS_AS(simulate(switching_only(1.0, 1.0, std::nullopt), c), ConfigError);
  CHECK_NOTHROW(simulate(switching_only(1.0, 1.0, 1.0), c));
}

TEST_CASE("both schemes reproduce the two-state occupation law", "[simulator]") {
  const double q12 = 1.0, q21 = 2.0, T = 2000.0;
  const double sd = oracle::two_state_occupation_sd(q12, q21, T);
  for (auto scheme : {SwitchScheme::per_step_thinning, SwitchScheme::exponential_proposals}) {
    auto c = config(1e-2, T, 0.5, 9);
    c.scheme = scheme;
    c.record_stride = 100000;
    const auto p = simulate(switching_only(q12, q21, 2.0), c);
    CHECK_THAT(p.occupation(1, 1), WithinAbs(2.0 / 3.0, 4.0 * sd));
    for (const auto& j : p.jumps) CHECK(j.from != j.to);
  }
}

TEST_CASE("coupling discrepancy vanishes for state-independent kernels", "[simulator]") {
  const auto m = switching_only(1.0, 2.0, 2.0);
  CHECK(sup_coupling_discrepancy(m.rate_kernel, 1, 0.5, 2) == 0.0);
  auto c = config(1e-2, 2.0, 0.1);
  const auto r = simulate_coupled(m, c);
  CHECK_FALSE(r.decoupled);
  CHECK(r.path.jumps.size() == r.frozen_jumps.size());
}

TEST_CASE("coupling of a state-dependent kernel decouples at the discrepancy rate", "[simulator]") {
  // q_12(x) = 1 + x^2, q_21 = 1: Xi(x, 1) = x^2.
  ModelSpec m = switching_only(1.0, 1.0, 3.0);
  m.rate_kernel = RateKernel(
      [](const Vector& x, Regime i, RateRow& out) {
        out.clear();
        out.push_back({i == 1 ? 2 : 1, i == 1 ? 1.0 + x.squaredNorm() : 1.0});
      },
      3.0);
  CHECK_THAT(coupling_discrepancy(m.rate_kernel, Vector::Constant(1, 0.5), 1), WithinAbs(0.25, 1e-15));
  CHECK_THAT(sup_coupling_discrepancy(m.rate_kernel, 1, 0.5, 2), WithinAbs(0.25, 1e-15));

  // X stays at 1 (zero coefficients): decoupling is the first uncommon jump,
  // at rate 1 while alpha = alpha_hat = 1, so P(decoupled by T) < 1 - e^{-T}.
  std::size_t decoupled = 0;
  const std::size_t n = 400;
  for (std::size_t k = 0; k < n; ++k) {
    auto c = config(1e-2, 0.5, 1.0, 3);
    c.path_index = k;
    decoupled += simulate_coupled(m, c).decoupled ? 1 : 0;
  }
  const double p = static_cast<double>(decoupled) / n;
  CHECK(p > 0.1);
  CHECK(p < 1.0 - std::exp(-0.5));
}
