#include <catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "switchdiff/errors.hpp"
#include "switchdiff/markov_chain.hpp"

using namespace switchdiff;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// Birth-death kernel on {1, 2, ...} with constant up and down rates.
RateKernel constant_birth_death(double up, double down) {
  return RateKernel(
      [=](const Vector&, Regime i, RateRow& out) {
        out.clear();
        if (i > 1) out.push_back({i - 1, down});
        out.push_back({i + 1, up});
      },
      up + down, {}, true);
}

Matrix generator(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix Q(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.size()));
  Eigen::Index r = 0;
  for (const auto& row : rows) {
    Eigen::Index c = 0;
    for (double v : row) Q(r, c++) = v;
    ++r;
  }
  return Q;
}

}  // namespace

TEST_CASE("lumped truncation keeps rows conservative", "[chain]") {
  const auto chain = truncate(constant_birth_death(1.0, 2.0), 10, TruncationMode::lump);
  CHECK(chain.lumped_tail);
  CHECK_THAT(chain.lumped_mass, WithinAbs(1.0, 1e-15));
  CHECK(chain.Q.rowwise().sum().cwiseAbs().maxCoeff() < 1e-14);

  const auto dropped = truncate(constant_birth_death(1.0, 2.0), 10, TruncationMode::drop);
  CHECK_THAT(dropped.truncation_leak, WithinAbs(1.0, 1e-15));
  CHECK(dropped.Q.rowwise().sum().cwiseAbs().maxCoeff() < 1e-14);
  CHECK_THROWS_AS(truncate(constant_birth_death(1.0, 2.0), 1), ContractError);
}

TEST_CASE("invariant measure of a geometric birth-death chain", "[chain]") {
  // up/down = 1/2 gives nu_i proportional to 2^{-i}.
  const auto chain = truncate(constant_birth_death(1.0, 2.0), 40, TruncationMode::lump);
  const auto nu = invariant_measure(chain);
  CHECK(nu.residual < 1e-12);
  CHECK_THAT(nu.nu.sum(), WithinAbs(1.0, 1e-14));
  for (int i = 1; i <= 30; ++i) CHECK_THAT(nu.nu(i - 1), WithinAbs(std::ldexp(1.0, -i), 1e-12));
  CHECK(nu.resolved_size() == 39);
  CHECK_THAT(nu.unresolved_mass(), WithinAbs(nu.nu(39), 1e-15));
}

TEST_CASE("reducible chains are rejected", "[chain]") {
  const auto Q = generator({{-1, 1, 0}, {1, -1, 0}, {0, 0, 0}});
  CHECK_FALSE(is_irreducible(Q));
  CHECK_THROWS_AS(invariant_measure(exact_chain(Q)), StructuralError);
  CHECK(is_irreducible(generator({{-1, 1}, {2, -2}})));
}

TEST_CASE("product-form birth-death measure agrees with the linear solve", "[chain]") {
  const std::vector<double> up{1.0, 1.5, 0.5};
  const std::vector<double> down{0.0, 2.0, 3.0, 2.5};
  const auto bd = birth_death_invariant(up, down, 60);
  CHECK(bd.cross_check_error < 1e-12);
  CHECK(bd.measure.residual < 1e-12);
  CHECK_THAT(bd.measure.nu(0), WithinRel(1.0 / (1.0 + bd.nu_star), 1e-12));
  CHECK_THAT(bd.measure.nu(1) / bd.measure.nu(0), WithinRel(1.0 / 2.0, 1e-12));
  CHECK_THAT(bd.measure.nu(2) / bd.measure.nu(1), WithinRel(1.5 / 3.0, 1e-12));
  CHECK_THAT(bd.printed_normalization_sum, WithinRel((1.0 + bd.nu_star) / bd.nu_star, 1e-15));
}

TEST_CASE("divergent product sums raise ErgodicityError", "[chain]") {
  const std::vector<double> up{2.0};
  const std::vector<double> down{1.0};
  CHECK_THROWS_AS(birth_death_invariant(up, down, 40), ErgodicityError);
}

TEST_CASE("uniformization matches the matrix exponential", "[chain]") {
  const auto chain = truncate(constant_birth_death(3.0, 5.0), 12, TruncationMode::lump);
  for (double t : {0.0, 0.01, 0.7, 5.0, 40.0}) {
    const Matrix P = transition_matrix(chain, t);
    CHECK((P - oracle::expm(chain.Q, t)).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((P.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
  }
  const auto two = exact_chain(generator({{-1.5, 1.5}, {0.5, -0.5}}));
  CHECK((transition_matrix(two, 1.3) - oracle::two_state_transition(1.5, 0.5, 1.3))
            .cwiseAbs()
            .maxCoeff() < 1e-12);
}

TEST_CASE("ergodicity fit recovers the spectral gap", "[chain]") {
  const auto chain = exact_chain(generator({{-1.5, 1.5}, {0.5, -0.5}}));
  const auto diag =
      ergodicity_diagnostic(chain, invariant_measure(chain), default_ergodicity_times());
  CHECK_THAT(diag.lambda, WithinRel(2.0, 0.02));
  CHECK(diag.r_squared > 0.999);
  CHECK(diag.verdict == ErgodicityDiagnostic::Verdict::exponentially_ergodic);
  CHECK(diag.distance.size() == default_ergodicity_times().size());
  const std::vector<double> one{1.0};
  CHECK_THROWS_AS(ergodicity_diagnostic(chain, invariant_measure(chain), one), ContractError);
}

TEST_CASE("Poisson solution satisfies the equation and is centered", "[chain]") {
  const auto chain = truncate(constant_birth_death(1.0, 3.0), 25, TruncationMode::lump);
  const auto nu = invariant_measure(chain);
  Vector b(25);
  for (Eigen::Index i = 0; i < 25; ++i) b(i) = std::sin(static_cast<double>(i));
  const auto sol = solve_poisson(chain, nu, b);
  CHECK(sol.projection != 0.0);
  CHECK(sol.residual < 1e-10);
  CHECK(std::abs(nu.nu.dot(sol.gamma)) < 1e-12);
  const Vector centered = b.array() - nu.nu.dot(b);
  CHECK((chain.Q * sol.gamma - centered).cwiseAbs().maxCoeff() < 1e-10);
  CHECK_THROWS_AS(solve_poisson(chain, nu, b, false), ContractError);
}

TEST_CASE("Poisson solution matches the integrated semigroup", "[chain]") {
  const auto chain = exact_chain(generator({{-1, 0.5, 0.5}, {1, -2, 1}, {0.25, 0.25, -0.5}}));
  const auto nu = invariant_measure(chain);
  Vector b(3);
  b << 1.0, -2.0, 0.5;
  b.array() -= nu.nu.dot(b);
  const auto sol = solve_poisson(chain, nu, b, false);
  const Vector ref = oracle::integrated_semigroup(chain.Q, b, 60.0, 400);
  CHECK((sol.gamma - ref).cwiseAbs().maxCoeff() < 1e-8);
}
