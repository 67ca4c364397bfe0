#include <catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "switchdiff/errors.hpp"
#include "switchdiff/stability.hpp"

using namespace switchdiff;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

Matrix mat2(double a, double b, double c, double d) {
  Matrix m(2, 2);
  m << a, b, c, d;
  return m;
}

// dX = B_i X dt + S_i X dW on R^2, two regimes, constant rates q12 = 1, q21 = 2.
ModelSpec linear2(const Matrix& B1, const Matrix& B2, const Matrix& S1, const Matrix& S2,
                  bool attach_linear) {
  ModelSpec m;
  m.dim = 2;
  m.noise_dim = 1;
  m.drift = [=](const Vector& x, Regime i, Vector& out) { out = (i == 1 ? B1 : B2) * x; };
  m.diffusion = [=](const Vector& x, Regime i, Matrix& out) { out = (i == 1 ? S1 : S2) * x; };
  m.rate_kernel = RateKernel(
      [](const Vector&, Regime i, RateRow& out) {
        out.clear();
        out.push_back({i == 1 ? 2 : 1, i == 1 ? 1.0 : 2.0});
      },
      2.0, {}, true);
  if (attach_linear) {
    m.linear = LinearPart{[=](Regime i) { return i == 1 ? B1 : B2; },
                          [=](Regime i) { return std::vector<Matrix>{i == 1 ? S1 : S2}; }};
  }
  return m;
}

InvariantMeasure two_state_nu() {
  Matrix Q(2, 2);
  Q << -1.0, 1.0, 2.0, -2.0;
  return invariant_measure(exact_chain(Q));
}

}  // namespace

TEST_CASE("mean drift sign accounts for the unresolved tail", "[stability]") {
  InvariantMeasure nu;
  nu.nu = Vector(3);
  nu.nu << 0.5, 0.3, 0.2;
  nu.lumped_tail = true;
  const auto c = [](Regime i) { return i == 1 ? -1.0 : 0.5; };
  // Resolved: -0.5 + 0.15 = -0.35; tail 0.2 * bound.
  auto md = mean_drift_criterion(c, 1.0, nu);
  CHECK_THAT(md.value, WithinAbs(-0.35, 1e-15));
  CHECK_THAT(md.tail_bound, WithinAbs(0.2, 1e-15));
  CHECK(md.sign == Sign::negative);
  md = mean_drift_criterion(c, 2.0, nu);
  CHECK(md.sign == Sign::undetermined);
  nu.lumped_tail = false;
  md = mean_drift_criterion(c, 2.0, nu);
  CHECK_THAT(md.value, WithinAbs(-0.25, 1e-15));
  CHECK(md.sign == Sign::negative);
}

TEST_CASE("default cutoffs", "[stability]") {
  const auto small = default_cutoffs(10, 0.5);
  CHECK(small.k_scan == 100);
  CHECK(small.tail_from == 50);
  const auto big = default_cutoffs(40, 0.5);
  CHECK(big.k_scan == 160);
  CHECK(big.tail_from == 80);
}

TEST_CASE("theorem names round-trip", "[stability]") {
  for (auto t : {Theorem::T3_1, Theorem::T3_2, Theorem::T3_3, Theorem::T3_5_ergodic,
                 Theorem::T3_5_strong}) {
    CHECK(parse_theorem(to_string(t)) == t);
  }
  CHECK_THROWS_AS(parse_theorem("T9"), ConfigError);
}

TEST_CASE("theorem checks name their missing inputs", "[stability]") {
  TheoremInputs in;
  try {
    check_theorem_hypotheses(Theorem::T3_3, in);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("invariant measure") != std::string::npos);
    CHECK(msg.find("M_g scan") != std::string::npos);
    CHECK(msg.find("kernel-continuity scan") != std::string::npos);
  }
}

TEST_CASE("certificates for a stable two-regime linear system", "[stability]") {
  const auto m = linear2(mat2(-2, 0.5, 0, -1.5), mat2(0.2, 0, 0, 0.1), mat2(0.2, 0, 0, 0.2),
                         mat2(0.1, 0, 0, 0.1), true);
  const auto nu = two_state_nu();
  const auto chain = exact_chain(mat2(-1, 1, 2, -2));
  const auto erg = ergodicity_diagnostic(chain, nu, default_ergodicity_times());

  auto V = square_lyapunov();
  // L_i |x|^2 <= (2 Lambda1_i + Lambda2_i) |x|^2 with the largest eigenvalues.
  const auto data = linearize(m, std::vector<Regime>{1, 2}, std::vector<double>{0.1, 0.01});
  std::vector<double> c;
  for (std::size_t k = 0; k < 2; ++k) c.push_back(2.0 * data.Lambda1[k] + data.Lambda2[k][0] + 1e-12);
  V.c = [c](Regime i) { return c[i == 1 ? 0 : 1]; };
  V.c_bound = std::max(std::abs(c[0]), std::abs(c[1]));
  V.g = RateProfile::identity(1.0);

  ScanCutoffs cut{2, 1, 1.0};
  const auto grid = radial_grid(2, 1.0, 2);
  const auto drift = verify_drift_condition(m, V, grid);
  REQUIRE(drift.holds());
  const auto mg = scan_Mg(m, V, cut);
  CHECK(mg.bounded);
  const auto cont = scan_kernel_continuity(m.rate_kernel, 2, cut);
  CHECK(cont.vanishes);

  TheoremInputs in{&nu, &erg, &drift, &mg, &cont, V.c, V.c_bound, true, cut};
  const auto r1 = check_theorem_hypotheses(Theorem::T3_1, in);
  CHECK(r1.status("g_identity") == HypothesisStatus::holds);
  CHECK(r1.status("strong_exponential_ergodicity") == HypothesisStatus::holds);
  CHECK(r1.verdict == Verdict::stable_certified);
  CHECK(check_theorem_hypotheses(Theorem::T3_3, in).verdict == Verdict::stable_certified);

  // The reversed drift report is rejected for the stability theorems.
  CHECK_THROWS_AS(check_theorem_hypotheses(Theorem::T3_5_strong, in), ConfigError);

  // A nonlinear profile voids the identity requirement.
  in.g_is_identity = false;
  CHECK(check_theorem_hypotheses(Theorem::T3_1, in).verdict == Verdict::inconclusive);

  const auto crit = proposition41_criterion(data, nu);
  CHECK(crit.verdict == Verdict::stable_certified);
}

TEST_CASE("limsup and liminf read the tail window", "[stability]") {
  const auto nu = two_state_nu();
  const auto erg = ergodicity_diagnostic(exact_chain(mat2(-1, 1, 2, -2)), nu, default_ergodicity_times());
  DriftConditionReport drift;
  MgScan mg;
  mg.bounded = true;
  KernelContinuityScan cont;
  cont.vanishes = true;
  const auto c = [](Regime i) { return i <= 60 ? -1.0 : 0.5; };
  TheoremInputs in{&nu, &erg, &drift, &mg, &cont, c, 1.0, false, default_cutoffs(2, 1.0)};
  const auto r = check_theorem_hypotheses(Theorem::T3_2, in);
  CHECK(r.limsup_tail_c == 0.5);
  CHECK(r.liminf_tail_c == -1.0);
  CHECK(r.status("limsup_c_negative") == HypothesisStatus::fails);
  CHECK(r.verdict == Verdict::inconclusive);
}

TEST_CASE("linearization by differences matches the exact linear part", "[stability]") {
  const Matrix B1 = mat2(-1, 2, -0.5, -3), B2 = mat2(0.5, 0, 1, -0.2);
  const Matrix S1 = mat2(0.3, 0.1, 0, 0.2), S2 = mat2(0, 0.4, 0.4, 0);
  const std::vector<Regime> regs{1, 2};
  const std::vector<double> radii{0.1, 0.01, 0.001};
  const auto exact = linearize(linear2(B1, B2, S1, S2, true), regs, radii);
  const auto fd = linearize(linear2(B1, B2, S1, S2, false), regs, radii);
  CHECK(exact.exact);
  CHECK_FALSE(fd.exact);
  for (std::size_t m = 0; m < 2; ++m) {
    CHECK((exact.drift[m] - fd.drift[m]).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((exact.diffusion[m][0] - fd.diffusion[m][0]).cwiseAbs().maxCoeff() < 1e-8);
  }
  CHECK(exact.residual_decreasing);
  for (double r : exact.residuals) CHECK(r < 1e-12);

  // Eigenvalue data against the closed form for symmetric 2x2 matrices.
  const Matrix sym = 0.5 * (B1 + B1.transpose());
  CHECK_THAT(exact.Lambda1[0], WithinAbs(oracle::sym2_max(sym(0, 0), sym(0, 1), sym(1, 1)), 1e-12));
  CHECK_THAT(exact.lambda1[0], WithinAbs(oracle::sym2_min(sym(0, 0), sym(0, 1), sym(1, 1)), 1e-12));
  const Matrix a = S2 * S2.transpose();
  CHECK_THAT(exact.Lambda2[1][0], WithinAbs(oracle::sym2_max(a(0, 0), a(0, 1), a(1, 1)), 1e-12));
}

TEST_CASE("eigenvalue criterion weights regimes by the invariant law", "[stability]") {
  const Matrix B1 = mat2(-3, 0, 0, -2), B2 = mat2(1, 0, 0, 0.5);
  const Matrix Z = Matrix::Zero(2, 2);
  const auto data = linearize(linear2(B1, B2, Z, Z, true), std::vector<Regime>{1, 2},
                              std::vector<double>{0.1, 0.01});
  const auto nu = two_state_nu();  // (2/3, 1/3)
  const auto crit = proposition41_criterion(data, nu);
  CHECK_THAT(crit.stable_value, WithinAbs(2.0 / 3.0 * -2.0 + 1.0 / 3.0 * 1.0, 1e-12));
  CHECK_THAT(crit.unstable_value, WithinAbs(2.0 / 3.0 * -3.0 + 1.0 / 3.0 * 0.5, 1e-12));
  CHECK(crit.tail_bound < 1e-12);
  CHECK(crit.verdict == Verdict::stable_certified);
}

TEST_CASE("nonlinear residual that does not shrink is flagged", "[stability]") {
  auto m = linear2(mat2(-1, 0, 0, -1), mat2(-1, 0, 0, -1), Matrix::Zero(2, 2), Matrix::Zero(2, 2),
                   false);
  // Remainder 1e-3 x_1 sin(log|x_1|): its ratio to |x| oscillates instead of shrinking.
  m.drift = [](const Vector& x, Regime, Vector& out) {
    out = -x;
    if (x(0) != 0.0) out(0) += 1e-3 * x(0) * std::sin(std::log(std::abs(x(0))));
  };
  const auto data =
      linearize(m, std::vector<Regime>{1}, std::vector<double>{1e-1, 1e-2, 1e-3, 1e-4});
  CHECK_FALSE(data.residual_decreasing);
  CHECK_FALSE(data.warnings.empty());
}

TEST_CASE("kernel continuity scan detects a jump at the origin", "[stability]") {
  RateKernel jumpy(
      [](const Vector& x, Regime i, RateRow& out) {
        out.clear();
        out.push_back({i == 1 ? 2 : 1, x.norm() > 0.0 ? 2.0 : 1.0});
      },
      2.0);
  ScanCutoffs cut{2, 1, 0.5};
  CHECK_FALSE(scan_kernel_continuity(jumpy, 1, cut).vanishes);

  RateKernel smooth(
      [](const Vector& x, Regime i, RateRow& out) {
        out.clear();
        out.push_back({i == 1 ? 2 : 1, 1.0 + x.norm()});
      },
      2.0);
  const auto scan = scan_kernel_continuity(smooth, 1, cut);
  CHECK(scan.vanishes);
  CHECK_THAT(scan.values.front(), WithinAbs(0.5, 1e-15));
}

TEST_CASE("M_g scan separates bounded and singular ratios", "[stability]") {
  auto V = square_lyapunov();
  V.g = RateProfile::identity(1.0);
  ScanCutoffs cut{2, 1, 0.5};
  // sigma = s x: |V_x sigma| / V = 2 s.
  auto m = linear2(mat2(-1, 0, 0, -1), mat2(-1, 0, 0, -1), 0.3 * Matrix::Identity(2, 2),
                   0.3 * Matrix::Identity(2, 2), true);
  const auto ok = scan_Mg(m, V, cut);
  CHECK(ok.bounded);
  CHECK_THAT(ok.sup, WithinRel(0.6, 1e-9));

  // sigma = |x|^{1/2} e_1: the ratio grows like |x|^{-1/2}.
  m.diffusion = [](const Vector& x, Regime, Matrix& out) {
    out = Matrix::Zero(2, 1);
    out(0, 0) = std::sqrt(x.norm());
  };
  CHECK_FALSE(scan_Mg(m, V, cut).bounded);
}
