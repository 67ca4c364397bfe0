#include "switchdiff/stability.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include "switchdiff/errors.hpp"

namespace switchdiff {

namespace {

// Radii h * 10^(-k/4), k = 0..24.
std::vector<double> scan_radii(double h) {
  std::vector<double> r;
  for (int k = 0; k <= 24; ++k) r.push_back(h * std::pow(10.0, -k / 4.0));
  return r;
}

std::vector<Vector> signed_directions(int dim) {
  std::vector<Vector> out;
  for (const auto& d : probe_directions(dim)) {
    out.push_back(d);
    out.push_back(-d);
  }
  return out;
}

}  // namespace

std::string to_string(Sign s) {
  switch (s) {
    case Sign::negative: return "negative";
    case Sign::positive: return "positive";
    case Sign::undetermined: return "undetermined";
  }
  return "undetermined";
}

std::string to_string(Theorem t) {
  switch (t) {
    case Theorem::T3_1: return "T3_1";
    case Theorem::T3_2: return "T3_2";
    case Theorem::T3_3: return "T3_3";
    case Theorem::T3_5_ergodic: return "T3_5_ergodic";
    case Theorem::T3_5_strong: return "T3_5_strong";
  }
  return "T3_2";
}

Theorem parse_theorem(const std::string& name) {
  for (auto t : {Theorem::T3_1, Theorem::T3_2, Theorem::T3_3, Theorem::T3_5_ergodic,
                 Theorem::T3_5_strong}) {
    if (to_string(t) == name) return t;
  }
  throw ConfigError("unknown theorem '" + name + "'");
}

std::string to_string(HypothesisStatus s) {
  switch (s) {
    case HypothesisStatus::holds: return "holds";
    case HypothesisStatus::fails: return "fails";
    case HypothesisStatus::unchecked: return "unchecked";
  }
  return "unchecked";
}

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::stable_certified: return "stable_certified";
    case Verdict::unstable_certified: return "unstable_certified";
    case Verdict::inconclusive: return "inconclusive";
  }
  return "inconclusive";
}

MeanDrift mean_drift_criterion(const std::function<double(Regime)>& c, double bound,
                               const InvariantMeasure& nu) {
  MeanDrift out;
  const Eigen::Index n = nu.resolved_size();
  for (Eigen::Index k = 0; k < n; ++k) out.value += c(static_cast<Regime>(k + 1)) * nu.nu[k];
  out.tail_bound = std::abs(bound) * nu.unresolved_mass();
  if (out.value + out.tail_bound < 0.0) {
    out.sign = Sign::negative;
  } else if (out.value - out.tail_bound > 0.0) {
    out.sign = Sign::positive;
  }
  return out;
}

ScanCutoffs default_cutoffs(Eigen::Index n_trunc, double radius) {
  ScanCutoffs c;
  c.k_scan = std::max<Regime>(4 * static_cast<Regime>(n_trunc), 100);
  c.tail_from = c.k_scan / 2;
  c.radius = radius;
  return c;
}

HypothesisStatus CriterionReport::status(const std::string& name) const {
  for (const auto& [k, v] : hypotheses) {
    if (k == name) return v;
  }
  return HypothesisStatus::unchecked;
}

MgScan scan_Mg(const ModelSpec& spec, const LyapunovSpec& lyap, const ScanCutoffs& cutoffs) {
  if (cutoffs.radius <= 0.0) throw ConfigError("M_g scan needs a positive radius");
  const auto radii = scan_radii(cutoffs.radius);
  const auto dirs = signed_directions(spec.dim);
  std::vector<double> s(radii.size(), 0.0);
  Matrix sigma(spec.dim, spec.noise_dim);
  for (std::size_t k = 0; k < radii.size(); ++k) {
    for (const auto& d : dirs) {
      const Vector x = radii[k] * d;
      const double gv = lyap.g.g(lyap.V(x));
      const Vector grad = gradient_of(lyap, x);
      for (Regime i = 1; i <= cutoffs.k_scan; ++i) {
        spec.diffusion(x, i, sigma);
        const double num = (grad.transpose() * sigma).norm();
        const double ratio = gv > 0.0 ? num / gv : (num > 0.0 ? INFINITY : 0.0);
        s[k] = std::max(s[k], ratio);
      }
    }
  }
  MgScan out;
  for (double v : s) out.sup = std::max(out.sup, v);
  const std::size_t last = radii.size() - 1, first = last - 4;
  if (s[last] > 0.0 && s[first] > 0.0 && std::isfinite(s[last])) {
    out.small_radius_slope = std::log(s[last] / s[first]) / std::log(radii[last] / radii[first]);
  } else if (s[last] > 0.0) {
    out.small_radius_slope = -INFINITY;
  }
  out.bounded = std::isfinite(out.sup) && out.small_radius_slope >= -0.05;
  return out;
}

KernelContinuityScan scan_kernel_continuity(const RateKernel& kernel, int dim,
                                            const ScanCutoffs& cutoffs) {
  if (cutoffs.radius <= 0.0) throw ConfigError("continuity scan needs a positive radius");
  KernelContinuityScan out;
  out.radii = scan_radii(cutoffs.radius);
  const auto dirs = signed_directions(dim);
  const Vector zero = Vector::Zero(dim);
  std::vector<RateRow> base(static_cast<std::size_t>(cutoffs.k_scan));
  for (Regime i = 1; i <= cutoffs.k_scan; ++i) kernel.row(zero, i, base[i - 1]);

  RateRow row;
  for (double r : out.radii) {
    double sup = 0.0;
    for (const auto& d : dirs) {
      const Vector x = r * d;
      for (Regime i = 1; i <= cutoffs.k_scan; ++i) {
        kernel.row(x, i, row);
        std::map<Regime, double> diff;
        for (const auto& e : row) diff[e.target] += e.rate;
        for (const auto& e : base[i - 1]) diff[e.target] -= e.rate;
        double xi = 0.0;
        for (const auto& [j, v] : diff) {
          if (j != i) xi += std::abs(v);
        }
        sup = std::max(sup, xi);
      }
    }
    out.values.push_back(sup);
  }
  bool nonincreasing = true;
  for (std::size_t k = 1; k < out.values.size(); ++k) {
    if (out.values[k] > out.values[k - 1] * (1.0 + 1e-9) + 1e-15) nonincreasing = false;
  }
  out.vanishes =
      nonincreasing && out.values.back() <= 1e-3 * std::max(1.0, out.values.front());
  return out;
}

CriterionReport check_theorem_hypotheses(Theorem which, const TheoremInputs& in) {
  const bool strong = which == Theorem::T3_1 || which == Theorem::T3_3 ||
                      which == Theorem::T3_5_strong;
  const bool unstable = which == Theorem::T3_5_ergodic || which == Theorem::T3_5_strong;
  const bool needs_mg = which != Theorem::T3_1;
  const bool needs_continuity = strong;
  const bool needs_tail = which == Theorem::T3_2 || which == Theorem::T3_5_ergodic;

  std::vector<std::string> gaps;
  if (!in.nu) gaps.push_back("invariant measure");
  if (!in.ergodicity) gaps.push_back("ergodicity diagnostic");
  if (!in.drift) gaps.push_back("drift-condition report");
  if (!in.c) gaps.push_back("c sequence");
  if (needs_mg && !in.mg) gaps.push_back("M_g scan");
  if (needs_continuity && !in.continuity) gaps.push_back("kernel-continuity scan");
  if (needs_tail && in.cutoffs.k_scan <= in.cutoffs.tail_from) gaps.push_back("scan cutoffs");
  if (!gaps.empty()) {
    std::string msg = "theorem " + to_string(which) + " is missing:";
    for (const auto& g : gaps) msg += " " + g + ";";
    msg.pop_back();
    throw ConfigError(msg);
  }
  const auto want_dir = unstable ? DriftDirection::lower : DriftDirection::upper;
  if (in.drift->direction != want_dir) {
    throw ConfigError("theorem " + to_string(which) + " needs the " +
                      (unstable ? std::string("reversed (>=)") : std::string("upper (<=)")) +
                      " drift-condition report");
  }

  CriterionReport rep;
  rep.theorem = which;
  rep.cutoffs = in.cutoffs;
  rep.mean_drift = mean_drift_criterion(in.c, in.c_bound, *in.nu);

  auto add = [&](const std::string& name, HypothesisStatus s) {
    rep.hypotheses.emplace_back(name, s);
  };
  auto from_bool = [](bool b) { return b ? HypothesisStatus::holds : HypothesisStatus::fails; };

  using EV = ErgodicityDiagnostic::Verdict;
  const auto ev = in.ergodicity->verdict;
  const auto erg = (ev == EV::exponentially_ergodic || ev == EV::mixed)
                       ? HypothesisStatus::holds
                       : HypothesisStatus::unchecked;
  add(strong ? (which == Theorem::T3_1 ? "strong_exponential_ergodicity" : "strong_ergodicity")
             : "ergodicity",
      erg);
  add(unstable ? "reversed_drift_condition" : "drift_condition", from_bool(in.drift->holds()));
  if (which == Theorem::T3_1) add("g_identity", from_bool(in.g_is_identity));

  if (needs_tail || in.cutoffs.k_scan > in.cutoffs.tail_from) {
    double mx = -INFINITY, mn = INFINITY;
    for (Regime i = in.cutoffs.tail_from + 1; i <= in.cutoffs.k_scan; ++i) {
      const double ci = in.c(i);
      mx = std::max(mx, ci);
      mn = std::min(mn, ci);
    }
    rep.limsup_tail_c = mx;
    rep.liminf_tail_c = mn;
  }
  if (which == Theorem::T3_2) add("limsup_c_negative", from_bool(rep.limsup_tail_c < 0.0));
  if (which == Theorem::T3_5_ergodic) add("liminf_c_positive", from_bool(rep.liminf_tail_c > 0.0));
  if (needs_mg) add("mg_bounded", from_bool(in.mg->bounded));
  if (needs_continuity) add("kernel_continuity", from_bool(in.continuity->vanishes));

  if (unstable) {
    add("mean_drift_positive", from_bool(rep.mean_drift.sign == Sign::positive));
  } else {
    add("mean_drift_negative", from_bool(rep.mean_drift.sign == Sign::negative));
  }

  const bool all_hold = std::all_of(rep.hypotheses.begin(), rep.hypotheses.end(),
                                    [](const auto& h) { return h.second == HypothesisStatus::holds; });
  if (all_hold) rep.verdict = unstable ? Verdict::unstable_certified : Verdict::stable_certified;

  std::ostringstream os;
  os << "grid evidence: regimes 1.." << in.cutoffs.k_scan << ", tail window ("
     << in.cutoffs.tail_from << ", " << in.cutoffs.k_scan << "], radius " << in.cutoffs.radius;
  rep.notes.push_back(os.str());
  if (erg == HypothesisStatus::unchecked) {
    rep.notes.push_back("ergodicity diagnostic inconclusive on the truncation");
  }
  return rep;
}

std::pair<double, double> symmetric_eig_range(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericError("symmetric eigensolver failed");
  const auto& ev = es.eigenvalues();
  return {ev.maxCoeff(), ev.minCoeff()};
}

LinearizationData linearize(const ModelSpec& spec, std::span<const Regime> regimes,
                            std::span<const double> probe_radii) {
  if (!spec.zero_fixed) throw ContractError("linearize requires a model with X = 0 fixed");
  const int n = spec.dim, d = spec.noise_dim;
  LinearizationData out;
  out.exact = spec.linear.has_value();
  out.probe_radii.assign(probe_radii.begin(), probe_radii.end());

  constexpr double eps = 1e-6;
  Vector fp(n), fm(n);
  Matrix sp(n, d), sm(n, d);
  for (Regime i : regimes) {
    Matrix B(n, n);
    std::vector<Matrix> S(static_cast<std::size_t>(d), Matrix::Zero(n, n));
    if (spec.linear) {
      B = spec.linear->drift(i);
      S = spec.linear->diffusion(i);
      if (B.rows() != n || B.cols() != n || static_cast<int>(S.size()) != d) {
        throw ConfigError("linear part has the wrong shape");
      }
    } else {
      for (int j = 0; j < n; ++j) {
        Vector e = Vector::Zero(n);
        e[j] = eps;
        spec.drift(e, i, fp);
        spec.drift(-e, i, fm);
        B.col(j) = (fp - fm) / (2.0 * eps);
        spec.diffusion(e, i, sp);
        spec.diffusion(-e, i, sm);
        for (int k = 0; k < d; ++k) S[k].col(j) = (sp.col(k) - sm.col(k)) / (2.0 * eps);
      }
    }
    const auto [L1, l1] = symmetric_eig_range(0.5 * (B + B.transpose()));
    std::vector<double> L2, l2;
    for (const auto& Sk : S) {
      const auto [a, b] = symmetric_eig_range(Sk * Sk.transpose());
      L2.push_back(a);
      l2.push_back(std::max(0.0, b));
    }
    out.regimes.push_back(i);
    out.drift.push_back(std::move(B));
    out.diffusion.push_back(std::move(S));
    out.Lambda1.push_back(L1);
    out.lambda1.push_back(l1);
    out.Lambda2.push_back(std::move(L2));
    out.lambda2.push_back(std::move(l2));
  }

  const auto dirs = signed_directions(n);
  Vector b(n);
  Matrix sigma(n, d), lin(n, d);
  for (double r : out.probe_radii) {
    double sup = 0.0;
    for (const auto& u : dirs) {
      const Vector x = r * u;
      for (std::size_t m = 0; m < out.regimes.size(); ++m) {
        spec.drift(x, out.regimes[m], b);
        spec.diffusion(x, out.regimes[m], sigma);
        for (int k = 0; k < d; ++k) lin.col(k) = out.diffusion[m][k] * x;
        const double xi = (b - out.drift[m] * x).norm();
        const double zeta = (sigma - lin).norm();
        sup = std::max(sup, std::max(xi, zeta) / r);
      }
    }
    out.residuals.push_back(sup);
  }

  // Residuals must shrink as the probe radius shrinks.
  std::vector<std::size_t> order(out.probe_radii.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t c) { return out.probe_radii[a] > out.probe_radii[c]; });
  out.residual_decreasing = true;
  for (std::size_t k = 1; k < order.size(); ++k) {
    if (out.residuals[order[k]] > out.residuals[order[k - 1]] + 1e-8) {
      out.residual_decreasing = false;
    }
  }
  if (!out.residual_decreasing) {
    out.warnings.push_back(
        "linearization residual does not decrease toward 0; eigenvalue criterion inapplicable");
  }
  return out;
}

EigenCriterion proposition41_criterion(const LinearizationData& data, const InvariantMeasure& nu) {
  EigenCriterion out;
  const Eigen::Index resolved = nu.resolved_size();
  double covered = 0.0, bound = 0.0;
  for (std::size_t m = 0; m < data.regimes.size(); ++m) {
    double up = data.Lambda1[m], lo = data.lambda1[m];
    double diff = 0.0;
    for (std::size_t k = 0; k < data.Lambda2[m].size(); ++k) {
      up += 0.5 * data.Lambda2[m][k];
      lo += 0.5 * data.lambda2[m][k];
      diff += 0.5 * data.Lambda2[m][k];
    }
    Eigen::EigenSolver<Matrix> es(data.drift[m], false);
    const Vector re = es.eigenvalues().real();
    const double up_raw = re.maxCoeff() + diff;
    double lo_raw = re.minCoeff();
    for (double v : data.lambda2[m]) lo_raw += 0.5 * v;

    bound = std::max({bound, std::abs(up), std::abs(lo)});
    const Regime i = data.regimes[m];
    if (i < 1 || i > resolved) continue;
    const double w = nu.nu[i - 1];
    covered += w;
    out.stable_value += w * up;
    out.unstable_value += w * lo;
    out.stable_value_raw += w * up_raw;
    out.unstable_value_raw += w * lo_raw;
  }
  out.tail_bound = bound * std::max(0.0, 1.0 - covered);
  if (out.stable_value + out.tail_bound < 0.0) {
    out.verdict = Verdict::stable_certified;
  } else if (out.unstable_value - out.tail_bound > 0.0) {
    out.verdict = Verdict::unstable_certified;
  }
  return out;
}

}  // namespace switchdiff
