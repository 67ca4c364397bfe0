#include "switchdiff/tools/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "switchdiff/export.hpp"
#include "switchdiff/simulator.hpp"

#ifndef SWITCHDIFF_VERSION
#define SWITCHDIFF_VERSION "unknown"
#endif

namespace switchdiff::tools {

using nlohmann::json;

namespace {

json head(const Vector& v, Eigen::Index n) {
  json out = json::array();
  for (Eigen::Index k = 0; k < std::min(n, v.size()); ++k) out.push_back(v[k]);
  return out;
}

Regime scan_limit(const Scenario& sc, Regime k) {
  return sc.finite_states ? std::min(k, *sc.finite_states) : k;
}

ScanCutoffs cutoffs_for(const Scenario& sc) {
  const double radius = sc.has_lyapunov ? sc.lyap.domain_radius : ball_radius(sc);
  ScanCutoffs c = default_cutoffs(sc.truncation, radius);
  if (sc.finite_states) {
    c.k_scan = *sc.finite_states;
    c.tail_from = c.k_scan / 2;
  }
  return c;
}

json profile_json(const RateProfile& g) {
  json j = {{"h", g.h()}};
  switch (g.kind()) {
    case RateProfile::Kind::identity:
      j["kind"] = "identity";
      break;
    case RateProfile::Kind::power_1_plus_gamma: {
      j["kind"] = "power_1_plus_gamma";
      j["gamma"] = g.gamma();
      const double y = g.h() / 4.0;
      j["G_at_h_over_4"] = g.G(y);
      j["G_unscaled_convention_at_h_over_4"] = *g.G_unscaled_convention(y);
      j["convention"] = "G(y) = (h^-gamma - y^-gamma) / gamma; the unscaled form is reported alongside";
      break;
    }
    case RateProfile::Kind::custom:
      j["kind"] = g.label();
      break;
  }
  return j;
}

std::optional<BirthDeathMeasure> birth_death_cross_check(const Scenario& sc, Regime K,
                                                         std::vector<std::string>& notes) {
  if (sc.finite_states || !sc.document.contains("kernel") ||
      sc.document["kernel"].value("family", "") != "birth_death") {
    return std::nullopt;
  }
  const Vector zero = Vector::Zero(sc.model.dim);
  std::vector<double> up(static_cast<std::size_t>(K), 0.0), down(static_cast<std::size_t>(K), 0.0);
  RateRow row;
  for (Regime i = 1; i <= K; ++i) {
    sc.model.rate_kernel.row(zero, i, row);
    for (const auto& e : row) {
      if (e.target == i + 1) up[i - 1] = e.rate;
      if (e.target == i - 1) down[i - 1] = e.rate;
    }
  }
  try {
    return birth_death_invariant(up, down, static_cast<Eigen::Index>(K));
  } catch (const Error& e) {
    notes.push_back(std::string("product-form measure unavailable: ") + e.what());
    return std::nullopt;
  }
}

std::vector<Regime> regime_range(Regime k) {
  std::vector<Regime> out;
  for (Regime i = 1; i <= k; ++i) out.push_back(i);
  return out;
}

Vector unit_direction(const Vector& x0) {
  const double n = x0.norm();
  if (n > 0.0) return x0 / n;
  Vector e = Vector::Zero(x0.size());
  e[0] = 1.0;
  return e;
}

std::vector<Functional> simulation_functionals(const Scenario& sc) {
  const double h = ball_radius(sc);
  return {Functional::stay_in_ball(h), Functional::converges_to_zero(1e-2 * h, h),
          Functional::occupation(1)};
}

}  // namespace

void apply_overrides(Scenario& sc, const Overrides& ov) {
  if (ov.seed) sc.sim.seed = *ov.seed;
  if (ov.paths) {
    if (*ov.paths < 1) throw ConfigError("--paths must be at least 1");
    sc.n_paths = *ov.paths;
  }
  if (ov.dt) sc.sim.dt = *ov.dt;
  if (ov.horizon) sc.sim.horizon = *ov.horizon;
  if (ov.truncation) {
    if (sc.finite_states) throw ConfigError("--truncation does not apply to a finite chain");
    if (*ov.truncation < 2) throw ConfigError("--truncation needs at least 2 states");
    sc.truncation = *ov.truncation;
  }
  if (ov.scheme) sc.sim.scheme = parse_switch_scheme(*ov.scheme);
  if (ov.h) {
    if (!(*ov.h > 0.0)) throw ConfigError("--h must be positive");
    sc.sim.stop_radius = *ov.h;
    sc.coupling_radius = *ov.h;
  }
  if (ov.x0.size() == 1) {
    sc.sim.x0 = ov.x0[0] * unit_direction(sc.sim.x0);
  } else if (!ov.x0.empty()) {
    if (static_cast<int>(ov.x0.size()) != sc.model.dim) {
      throw ConfigError("--x0 needs 1 or " + std::to_string(sc.model.dim) + " values");
    }
    sc.sim.x0 = Eigen::Map<const Vector>(ov.x0.data(), sc.model.dim);
  }
  sc.sim.validate(sc.model.dim);
}

double ball_radius(const Scenario& sc) {
  if (sc.sim.stop_radius) return *sc.sim.stop_radius;
  if (sc.has_lyapunov) return sc.lyap.domain_radius;
  return 1.0;
}

json provenance(const Scenario& sc) {
  return {{"seed", sc.sim.seed},
          {"version", SWITCHDIFF_VERSION},
          {"scenario_hash", "fnv1a64:" + hex64(sc.hash)},
          {"scenario_source", sc.source},
          {"threads", configured_threads()}};
}

bool AnalysisResult::stable_certified() const {
  return std::any_of(criteria.begin(), criteria.end(),
                     [](const auto& c) { return c.verdict == Verdict::stable_certified; });
}

bool AnalysisResult::unstable_certified() const {
  return std::any_of(criteria.begin(), criteria.end(),
                     [](const auto& c) { return c.verdict == Verdict::unstable_certified; });
}

AnalysisResult analyze(const Scenario& sc) {
  AnalysisResult r;
  std::vector<std::string> notes;
  r.cutoffs = cutoffs_for(sc);
  const Regime K = scan_limit(sc, r.cutoffs.k_scan);

  const auto grid = radial_grid(sc.model.dim, r.cutoffs.radius, K);
  r.model_check = validate_model(sc.model, grid);

  r.chain = truncate(sc.model.rate_kernel, sc.truncation,
                     sc.finite_states ? TruncationMode::drop : sc.truncation_mode, std::nullopt,
                     sc.model.dim);
  r.nu = invariant_measure(r.chain);
  r.ergodicity = ergodicity_diagnostic(r.chain, r.nu, default_ergodicity_times());
  r.birth_death = birth_death_cross_check(sc, r.cutoffs.k_scan, notes);
  r.continuity = scan_kernel_continuity(sc.model.rate_kernel, sc.model.dim,
                                        ScanCutoffs{K, r.cutoffs.tail_from, r.cutoffs.radius});

  json lyap_json = nullptr;
  if (sc.has_lyapunov) {
    const auto lcheck = validate_lyapunov(sc.lyap, grid);
    r.drift = verify_drift_condition(sc.model, sc.lyap, grid, sc.direction);
    ScanCutoffs mg_cut = r.cutoffs;
    mg_cut.k_scan = K;
    r.mg = scan_Mg(sc.model, sc.lyap, mg_cut);

    TheoremInputs in;
    in.nu = &r.nu;
    in.ergodicity = &r.ergodicity;
    in.drift = &*r.drift;
    in.mg = &*r.mg;
    in.continuity = &r.continuity;
    in.c = sc.lyap.c;
    in.c_bound = sc.lyap.c_bound;
    in.g_is_identity = sc.lyap.g.kind() == RateProfile::Kind::identity;
    in.cutoffs = r.cutoffs;
    for (Theorem t : sc.theorems) r.criteria.push_back(check_theorem_hypotheses(t, in));

    json cvals = json::array();
    for (Regime i = 1; i <= std::min<Regime>(K, 10); ++i) cvals.push_back(sc.lyap.c(i));
    lyap_json = {{"family", sc.lyap.family},
                 {"domain_radius", sc.lyap.domain_radius},
                 {"c_head", cvals},
                 {"c_bound", sc.lyap.c_bound},
                 {"g", profile_json(sc.lyap.g)},
                 {"checks", lcheck.problems}};
  } else {
    notes.push_back("no Lyapunov specification: theorem checks skipped");
  }

  r.linearization = linearize(sc.model, regime_range(K), sc.probe_radii);
  r.eigen = proposition41_criterion(r.linearization, r.nu);

  json crit = json::array();
  for (const auto& c : r.criteria) crit.push_back(to_json(c));
  json lin = to_json(r.linearization);
  if (lin["regimes"].size() > 10) {
    json trimmed = json::array();
    for (std::size_t k = 0; k < 10; ++k) trimmed.push_back(lin["regimes"][k]);
    lin["regimes"] = trimmed;
    lin["regimes_reported"] = "first 10 of " + std::to_string(r.linearization.regimes.size());
  }
  json bd = nullptr;
  if (r.birth_death) {
    bd = {{"nu_star", r.birth_death->nu_star},
          {"tail_bound", r.birth_death->tail_bound},
          {"printed_normalization_sum", r.birth_death->printed_normalization_sum},
          {"cross_check_error", r.birth_death->cross_check_error},
          {"normalization", r.birth_death->normalization},
          {"nu_head", head(r.birth_death->measure.nu, 10)}};
  }

  r.report = {
      {"command", "analyze"},
      {"scenario", {{"name", sc.name}, {"description", sc.description}, {"parameters", sc.document}}},
      {"provenance", provenance(sc)},
      {"model_check", {{"problems", r.model_check.problems}, {"max_row_sum_error", r.model_check.max_row_sum_error}}},
      {"chain", diagnostics_json(r.chain, r.nu, r.ergodicity)},
      {"invariant_measure", {{"head", head(r.nu.nu, 10)},
                             {"unresolved_mass", r.nu.unresolved_mass()},
                             {"lumped_tail", r.nu.lumped_tail}}},
      {"birth_death", bd},
      {"lyapunov", lyap_json},
      {"drift_condition", r.drift ? to_json(*r.drift) : json(nullptr)},
      {"mg_scan", r.mg ? to_json(*r.mg) : json(nullptr)},
      {"kernel_continuity", to_json(r.continuity)},
      {"criteria", crit},
      {"linearization", lin},
      {"proposition41", to_json(r.eigen)},
      {"tolerances", {{"drift", kDriftTolerance}, {"invariant_residual", 1e-10}, {"ergodicity_r_squared", 0.99}}},
      {"notes", notes}};
  return r;
}

SimulationResult simulate_scenario(const Scenario& sc, bool sweep, std::size_t keep_paths) {
  SimulationResult res;
  const auto functionals = simulation_functionals(sc);
  EnsembleOptions opt;
  opt.n_paths = sc.n_paths;
  opt.keep_trajectories = keep_paths > 0;
  res.summary = run_ensemble(sc.model, sc.has_lyapunov ? &sc.lyap : nullptr, sc.sim, opt, functionals);
  if (keep_paths > 0 && res.summary.trajectories.size() > keep_paths) {
    res.summary.trajectories.resize(keep_paths);
  }

  json sweep_json = json::array();
  if (sweep) {
    const Vector dir = unit_direction(sc.sim.x0);
    const std::vector<Functional> stay{Functional::stay_in_ball(ball_radius(sc))};
    EnsembleOptions sopt;
    sopt.n_paths = sc.n_paths;
    for (double delta : sc.delta_sweep) {
      SimConfig cfg = sc.sim;
      cfg.x0 = delta * dir;
      const auto s = run_ensemble(sc.model, nullptr, cfg, sopt, stay);
      const SweepPoint pt{delta, s.estimates.front()};
      if (pt.stay.estimate > 0.95 && pt.stay.ci_low > 0.90 &&
          (!res.selected_delta || delta > *res.selected_delta)) {
        res.selected_delta = delta;
      }
      sweep_json.push_back({{"delta", delta}, {"stay_in_ball", to_json(pt.stay)}});
      res.sweep.push_back(pt);
    }
  }

  std::vector<double> x0(sc.sim.x0.data(), sc.sim.x0.data() + sc.sim.x0.size());
  res.report = {{"command", "simulate"},
                {"scenario", {{"name", sc.name}}},
                {"provenance", provenance(sc)},
                {"config", {{"dt", sc.sim.dt},
                            {"horizon", sc.sim.horizon},
                            {"scheme", to_string(sc.sim.scheme)},
                            {"x0", x0},
                            {"i0", sc.sim.i0},
                            {"h", ball_radius(sc)}}},
                {"ensemble", to_json(res.summary)},
                {"delta_sweep", sweep_json},
                {"selected_delta", res.selected_delta ? json(*res.selected_delta) : json(nullptr)}};
  return res;
}

RateResult verify_rate(const Scenario& sc) {
  if (!sc.has_lyapunov) throw ConfigError("verify-rate needs a lyapunov section");
  RateResult res;
  const auto analysis = analyze(sc);
  if (!analysis.stable_certified()) {
    res.warnings.push_back("scenario is not stable-certified; the rate estimate may fail");
  }
  EnsembleOptions opt;
  opt.n_paths = sc.n_paths;
  opt.keep_trajectories = true;
  const auto summary = run_ensemble(sc.model, &sc.lyap, sc.sim, opt, {});
  const std::vector<double> grid = default_lambda_grid();
  res.estimate = estimate_pathwise_rate(summary.trajectories, sc.lyap.V, sc.lyap.g, sc.T0,
                                        sc.epsilon, grid);

  // t^{1/gamma} V(X(T)) at the common end time, for the power profile.
  json terminal = nullptr;
  if (sc.lyap.g.kind() == RateProfile::Kind::power_1_plus_gamma) {
    std::vector<double> stat;
    for (const auto& p : summary.trajectories) {
      if (p.exited || p.blown_up || p.end_time < sc.sim.horizon) continue;
      stat.push_back(std::pow(p.end_time, 1.0 / sc.lyap.g.gamma()) * sc.lyap.V(p.final_state()));
    }
    if (!stat.empty()) {
      res.n_terminal = stat.size();
      res.terminal_max = *std::max_element(stat.begin(), stat.end());
      auto mid = stat.begin() + static_cast<std::ptrdiff_t>(stat.size() / 2);
      std::nth_element(stat.begin(), mid, stat.end());
      res.terminal_median = *mid;
      terminal = {{"statistic", "t^(1/gamma) V(X(T))"},
                  {"T", sc.sim.horizon},
                  {"n", res.n_terminal},
                  {"max", res.terminal_max},
                  {"median", res.terminal_median},
                  {"max_over_median", res.terminal_median > 0.0 ? res.terminal_max / res.terminal_median
                                                                 : INFINITY}};
    }
  }
  json curve = json::array();
  for (const auto& p : res.estimate.curve) {
    curve.push_back({{"lambda", p.lambda}, {"quantile", p.quantile}});
  }
  res.report = {{"command", "verify-rate"},
                {"scenario", {{"name", sc.name}}},
                {"provenance", provenance(sc)},
                {"epsilon", sc.epsilon},
                {"profile", profile_json(sc.lyap.g)},
                {"rate", to_json(res.estimate)},
                {"terminal", terminal},
                {"stable_certified", analysis.stable_certified()},
                {"warnings", res.warnings}};
  return res;
}

CouplingResult coupled_test(const Scenario& sc) {
  CouplingResult res;
  const double h = sc.coupling_radius;
  const Regime K = scan_limit(sc, cutoffs_for(sc).k_scan);
  res.bound = sc.sim.horizon * sup_coupling_discrepancy(sc.model.rate_kernel, sc.model.dim, h, K);
  if (sc.sim.x0.norm() >= h) throw ConfigError("coupled-test needs |x0| < h");

  SimConfig cfg = sc.sim;
  cfg.stop_radius = h;
  cfg.stop_at_exit = true;
  cfg.record_stride = std::max<std::size_t>(cfg.record_stride, 1000000);
  res.n_paths = sc.n_paths;
  for (std::size_t p = 0; p < sc.n_paths; ++p) {
    cfg.path_index = p;
    const auto c = simulate_coupled(sc.model, cfg, true);
    res.n_decoupled += c.decoupled;
    res.n_exited += c.tau_h.has_value();
  }
  const double n = static_cast<double>(res.n_paths);
  res.probability = static_cast<double>(res.n_decoupled) / n;
  res.sigma = std::sqrt(res.probability * (1.0 - res.probability) / n);
  res.passes = res.probability <= res.bound + 3.0 * res.sigma;
  const auto ci = wilson_interval(res.n_decoupled, res.n_paths);
  res.report = {{"command", "coupled-test"},
                {"scenario", {{"name", sc.name}}},
                {"provenance", provenance(sc)},
                {"h", h},
                {"T", sc.sim.horizon},
                {"regimes_scanned", K},
                {"n_paths", res.n_paths},
                {"n_decoupled", res.n_decoupled},
                {"n_exited", res.n_exited},
                {"probability", res.probability},
                {"ci_low", ci.first},
                {"ci_high", ci.second},
                {"sigma", res.sigma},
                {"bound", res.bound},
                {"passes", res.passes}};
  return res;
}

void write_report(const std::filesystem::path& path, json report, bool partial) {
  report["partial"] = partial;
  write_text_file(path, report.dump(2) + "\n");
}

}  // namespace switchdiff::tools
