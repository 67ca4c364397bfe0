#include "switchdiff/export.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <ostream>

#include "switchdiff/errors.hpp"

namespace switchdiff {

namespace {

// JSON has no infinities; map them to strings so the value stays visible.
nlohmann::json num(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_trajectory_csv(std::ostream& os, const Trajectory& path) {
  os << "t";
  for (int k = 1; k <= path.dim; ++k) os << ",x" << k;
  os << ",regime\n";
  for (std::size_t r = 0; r < path.size(); ++r) {
    os << format_double(path.times[r]);
    for (int k = 0; k < path.dim; ++k) {
      os << ',' << format_double(path.states[r * static_cast<std::size_t>(path.dim) + k]);
    }
    os << ',' << path.regimes[r] << '\n';
  }
}

void write_matrix_csv(std::ostream& os, const Matrix& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) os << ',';
      os << format_double(m(i, j));
    }
    os << '\n';
  }
}

void write_measure_csv(std::ostream& os, const InvariantMeasure& nu) {
  os << "regime,nu\n";
  for (Eigen::Index k = 0; k < nu.nu.size(); ++k) {
    const bool tail = nu.lumped_tail && k + 1 == nu.nu.size();
    os << (k + 1) << (tail ? "+" : "") << ',' << format_double(nu.nu[k]) << '\n';
  }
}

void write_quantile_curve_csv(std::ostream& os, const PathwiseRateEstimate& est) {
  os << "lambda,quantile,n_surviving\n";
  for (const auto& p : est.curve) {
    os << format_double(p.lambda) << ',' << format_double(p.quantile) << ',' << p.n_surviving
       << '\n';
  }
}

nlohmann::json diagnostics_json(const TruncatedChain& chain, const InvariantMeasure& nu,
                                const ErgodicityDiagnostic& diag) {
  return {{"N", chain.size()},
          {"leak", num(chain.truncation_leak)},
          {"lumped_mass", num(chain.lumped_mass)},
          {"lumped_tail", chain.lumped_tail},
          {"residual", num(nu.residual)},
          {"C", num(diag.C)},
          {"lambda", num(diag.lambda)},
          {"r_squared", num(diag.r_squared)},
          {"fit_points", diag.fit_points},
          {"verdict", to_string(diag.verdict)}};
}

nlohmann::json to_json(const FunctionalEstimate& est) {
  return {{"functional", est.functional}, {"estimate", num(est.estimate)},
          {"ci_low", num(est.ci_low)},    {"ci_high", num(est.ci_high)},
          {"interval", est.interval},     {"n_paths", est.n_paths},
          {"n_blowups", est.n_blowups},   {"seed", est.seed}};
}

nlohmann::json to_json(const EnsembleSummary& summary) {
  nlohmann::json est = nlohmann::json::array();
  for (const auto& e : summary.estimates) est.push_back(to_json(e));
  return {{"estimates", est},
          {"n_paths", summary.n_paths},
          {"n_blowups", summary.n_blowups},
          {"n_exited", summary.n_exited},
          {"seed", summary.seed}};
}

nlohmann::json to_json(const CriterionReport& report) {
  nlohmann::json hyp = nlohmann::json::object();
  for (const auto& [name, status] : report.hypotheses) hyp[name] = to_string(status);
  return {{"theorem", to_string(report.theorem)},
          {"hypotheses", hyp},
          {"mean_drift", num(report.mean_drift.value)},
          {"tail_bound", num(report.mean_drift.tail_bound)},
          {"mean_drift_sign", to_string(report.mean_drift.sign)},
          {"limsup_tail_c", num(report.limsup_tail_c)},
          {"liminf_tail_c", num(report.liminf_tail_c)},
          {"verdict", to_string(report.verdict)},
          {"scan_cutoffs",
           {{"k_scan", report.cutoffs.k_scan},
            {"tail_from", report.cutoffs.tail_from},
            {"radius", num(report.cutoffs.radius)}}},
          {"notes", report.notes}};
}

nlohmann::json to_json(const LinearizationData& data) {
  nlohmann::json regimes = nlohmann::json::array();
  for (std::size_t m = 0; m < data.regimes.size(); ++m) {
    nlohmann::json L2 = nlohmann::json::array(), l2 = nlohmann::json::array();
    for (double v : data.Lambda2[m]) L2.push_back(num(v));
    for (double v : data.lambda2[m]) l2.push_back(num(v));
    regimes.push_back({{"regime", data.regimes[m]},
                       {"Lambda1", num(data.Lambda1[m])},
                       {"lambda1", num(data.lambda1[m])},
                       {"Lambda2", L2},
                       {"lambda2", l2}});
  }
  nlohmann::json res = nlohmann::json::array();
  for (std::size_t k = 0; k < data.residuals.size(); ++k) {
    res.push_back({{"radius", num(data.probe_radii[k])}, {"residual", num(data.residuals[k])}});
  }
  return {{"exact", data.exact},
          {"residual_decreasing", data.residual_decreasing},
          {"residual_check", res},
          {"regimes", regimes},
          {"warnings", data.warnings}};
}

nlohmann::json to_json(const EigenCriterion& crit) {
  return {{"stable_value", num(crit.stable_value)},
          {"unstable_value", num(crit.unstable_value)},
          {"tail_bound", num(crit.tail_bound)},
          {"verdict", to_string(crit.verdict)},
          {"stable_value_raw_eigenvalues", num(crit.stable_value_raw)},
          {"unstable_value_raw_eigenvalues", num(crit.unstable_value_raw)}};
}

nlohmann::json to_json(const PathwiseRateEstimate& est) {
  return {{"lambda_hat", num(est.lambda_hat)}, {"resolution", num(est.resolution)},
          {"found", est.found},                {"n_paths", est.n_paths},
          {"n_surviving", est.n_surviving},    {"n_excluded", est.n_excluded},
          {"T0", num(est.T0)},                 {"T", num(est.T)}};
}

nlohmann::json to_json(const MgScan& scan) {
  return {{"sup", num(scan.sup)},
          {"small_radius_slope", num(scan.small_radius_slope)},
          {"bounded", scan.bounded}};
}

nlohmann::json to_json(const KernelContinuityScan& scan) {
  nlohmann::json pts = nlohmann::json::array();
  for (std::size_t k = 0; k < scan.radii.size(); ++k) {
    pts.push_back({{"radius", num(scan.radii[k])}, {"sup_xi", num(scan.values[k])}});
  }
  return {{"vanishes", scan.vanishes}, {"points", pts}};
}

nlohmann::json to_json(const DriftConditionReport& report) {
  nlohmann::json worst = nullptr;
  if (!report.violations.empty()) {
    const auto& v = report.violations.front();
    std::vector<double> x(v.x.data(), v.x.data() + v.x.size());
    worst = {{"x", x}, {"regime", v.i}, {"residual", num(v.residual)}};
  }
  return {{"direction", report.direction == DriftDirection::upper ? "upper" : "lower"},
          {"holds", report.holds()},
          {"n_checked", report.n_checked},
          {"n_violations", report.violations.size()},
          {"max_residual", num(report.max_residual)},
          {"tolerance", num(report.tolerance)},
          {"first_violation", worst}};
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw Error("cannot create directory " + path.parent_path().string());
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path.string() + " for writing");
  f << text;
  if (!f) throw Error("write failed for " + path.string());
}

}  // namespace switchdiff
