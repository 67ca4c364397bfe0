#include "switchdiff/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "switchdiff/errors.hpp"

namespace switchdiff {

std::string to_string(SwitchScheme s) {
  return s == SwitchScheme::per_step_thinning ? "per_step_thinning" : "exponential_proposals";
}

SwitchScheme parse_switch_scheme(const std::string& name) {
  if (name == "per_step_thinning") return SwitchScheme::per_step_thinning;
  if (name == "exponential_proposals") return SwitchScheme::exponential_proposals;
  throw ConfigError("unknown switching scheme '" + name + "'");
}

void SimConfig::validate(int dim) const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("dt must be positive");
  if (!(horizon > 0.0) || !std::isfinite(horizon)) throw ConfigError("horizon must be positive");
  if (dt > horizon) throw ConfigError("dt must not exceed the horizon");
  if (record_stride < 1) throw ConfigError("record_stride must be at least 1");
  if (x0.size() != dim) throw ConfigError("x0 has the wrong dimension");
  if (i0 < 1) throw ConfigError("regimes are 1-based");
  if (stop_radius && !(*stop_radius > 0.0)) throw ConfigError("stop radius must be positive");
}

Vector Trajectory::state(std::size_t k) const {
  return Eigen::Map<const Vector>(states.data() + k * static_cast<std::size_t>(dim), dim);
}

double Trajectory::occupation(Regime i, Regime initial) const {
  if (end_time <= 0.0) return 0.0;
  double time_in = 0.0;
  double last = 0.0;
  Regime current = initial;
  for (const auto& j : jumps) {
    if (current == i) time_in += j.time - last;
    last = j.time;
    current = j.to;
  }
  if (current == i) time_in += end_time - last;
  return time_in / end_time;
}

PathRng::PathRng(std::uint64_t seed, std::uint64_t path_index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(path_index),
                    static_cast<std::uint32_t>(path_index >> 32), 0x9e3779b9u};
  engine_.seed(seq);
}

double PathRng::uniform() { return std::generate_canonical<double, 53>(engine_); }

double PathRng::exponential(double rate) { return -std::log1p(-uniform()) / rate; }

Vector step(const ModelSpec& spec, const Vector& x, Regime i, double dt, const Vector& noise) {
  if (noise.size() != spec.noise_dim) throw ContractError("noise has the wrong dimension");
  return x + spec.eval_drift(x, i) * dt + spec.eval_diffusion(x, i) * noise;
}

Regime select_target(const RateRow& row, double total, double u_select) {
  // Locate u * q_i in the consecutive intervals Delta_ij laid out by j.
  const double z = u_select * total;
  double acc = 0.0;
  for (const auto& e : row) {
    acc += e.rate;
    if (z < acc) return e.target;
  }
  // z can equal the total up to rounding; fall back to the last positive entry.
  for (auto it = row.rbegin(); it != row.rend(); ++it) {
    if (it->rate > 0.0) return it->target;
  }
  throw ContractError("jump requested from an empty row");
}

namespace {

double row_total(const RateRow& row) {
  double s = 0.0;
  for (const auto& e : row) s += e.rate;
  return s;
}

void guard(double total, double dt) {
  if (total * dt > kThinningGuard) {
    std::ostringstream os;
    os << "q_i(x) * dt = " << total * dt << " exceeds " << kThinningGuard
       << "; subdivide the step";
    throw GuardError(os.str());
  }
}

}  // namespace

Regime switch_step(const RateKernel& kernel, const Vector& x, Regime i, double dt,
                   double u_accept, double u_select) {
  const RateRow row = kernel.row(x, i);
  const double total = row_total(row);
  guard(total, dt);
  if (total == 0.0 || u_accept >= total * dt) return i;
  return select_target(row, total, u_select);
}

namespace {

/// Shared state of one Euler-Maruyama path.
class PathState {
 public:
  PathState(const ModelSpec& spec, const SimConfig& config)
      : spec_(spec),
        config_(config),
        rng_(config.seed, config.path_index),
        x_(config.x0),
        x_next_(spec.dim),
        drift_(spec.dim),
        diffusion_(spec.dim, spec.noise_dim),
        noise_(spec.noise_dim) {
    traj_.dim = spec.dim;
    regime_ = config.i0;
    const double n = config.horizon / config.dt;
    steps_ = static_cast<std::size_t>(std::ceil(n - 1e-9));
    record();
    traj_.max_norm = x_.norm();
    check_exit();
  }

  bool finished() const noexcept { return done_; }
  double time() const noexcept { return t_; }
  Regime regime() const noexcept { return regime_; }
  const Vector& x() const noexcept { return x_; }
  PathRng& rng() noexcept { return rng_; }
  Trajectory& trajectory() noexcept { return traj_; }

  /// Current step length; grid times are k * dt, the last one is the horizon.
  double step_length() const noexcept { return next_time() - t_; }
  double next_time() const noexcept {
    return step_ + 1 >= steps_ ? config_.horizon
                               : std::min(config_.horizon, double(step_ + 1) * config_.dt);
  }

  /// Diffusion draw and Euler update into x_next_; does not advance time.
  void euler(double h) {
    for (int k = 0; k < spec_.noise_dim; ++k) noise_[k] = rng_.normal() * std::sqrt(h);
    spec_.drift(x_, regime_, drift_);
    spec_.diffusion(x_, regime_, diffusion_);
    x_next_ = x_;
    x_next_.noalias() += h * drift_;
    x_next_.noalias() += diffusion_ * noise_;
  }

  void jump(double at, Regime to) {
    traj_.jumps.push_back({at, regime_, to});
    regime_ = to;
  }

  /// Commits x_next_, advances time, runs exit/blow-up checks and recording.
  void commit() {
    x_.swap(x_next_);
    t_ = next_time();
    ++step_;
    const double norm = x_.norm();
    const bool last = step_ >= steps_;
    if (!std::isfinite(norm) || norm > kBlowupThreshold) {
      traj_.blown_up = true;
      traj_.max_norm = std::numeric_limits<double>::infinity();
      record();
      done_ = true;
      return;
    }
    traj_.max_norm = std::max(traj_.max_norm, norm);
    const bool exited_now = check_exit();
    if (exited_now || last || step_ % config_.record_stride == 0) record();
    if (last || (exited_now && config_.stop_at_exit)) done_ = true;
  }

  Trajectory finish() {
    traj_.end_time = t_;
    return std::move(traj_);
  }

 private:
  bool check_exit() {
    if (!config_.stop_radius || traj_.tau_h) return false;
    if (x_.norm() >= *config_.stop_radius) {
      traj_.tau_h = t_;
      traj_.exited = true;
      if (config_.stop_at_exit) done_ = true;
      return true;
    }
    return false;
  }

  void record() {
    if (!traj_.times.empty() && traj_.times.back() == t_) return;
    traj_.times.push_back(t_);
    traj_.states.insert(traj_.states.end(), x_.data(), x_.data() + x_.size());
    traj_.regimes.push_back(regime_);
  }

  const ModelSpec& spec_;
  const SimConfig& config_;
  PathRng rng_;
  Trajectory traj_;
  Vector x_, x_next_, drift_;
  Matrix diffusion_;
  Vector noise_;
  Regime regime_ = 1;
  double t_ = 0.0;
  std::size_t step_ = 0;
  std::size_t steps_ = 0;
  bool done_ = false;
};

/// Thinning over (t, t + h] with X frozen at x, subdividing whenever
/// q_i(x) times the sub-interval would exceed the guard.
template <typename RowFn, typename OnJump>
void thin_interval(double t, double h, const RowFn& fill_row, PathRng& rng, RateRow& row,
                   const OnJump& on_jump) {
  double elapsed = 0.0;
  while (elapsed < h) {
    fill_row(row);
    const double total = row_total(row);
    const double remaining = h - elapsed;
    if (total == 0.0) return;
    double sub = remaining;
    if (total * remaining > kThinningGuard) {
      sub = remaining / std::ceil(total * remaining / kThinningGuard);
    }
    elapsed = (sub == remaining) ? h : elapsed + sub;
    if (rng.uniform() < total * sub) {
      const Regime to = select_target(row, total, rng.uniform());
      on_jump(t + elapsed, to, row);
    }
  }
}

}  // namespace

Trajectory simulate(const ModelSpec& spec, const SimConfig& config) {
  config.validate(spec.dim);
  std::optional<double> M;
  if (config.scheme == SwitchScheme::exponential_proposals) {
    M = spec.rate_kernel.global_bound();
    if (!M) throw ConfigError("exponential_proposals needs a kernel with a global rate bound M");
    if (!(*M > 0.0)) M.reset();  // no switching at all
  }

  PathState path(spec, config);
  RateRow row;
  double next_proposal = M ? path.rng().exponential(*M) : 0.0;

  while (!path.finished()) {
    const double t = path.time();
    const double h = path.step_length();
    path.euler(h);

    if (config.scheme == SwitchScheme::per_step_thinning) {
      thin_interval(
          t, h, [&](RateRow& r) { spec.rate_kernel.row(path.x(), path.regime(), r); },
          path.rng(), row, [&](double at, Regime to, const RateRow&) { path.jump(at, to); });
    } else if (M) {
      while (next_proposal <= t + h) {
        spec.rate_kernel.row(path.x(), path.regime(), row);
        const double total = row_total(row);
        if (total > *M * (1.0 + 1e-12)) throw EvaluationError("q_i(x) exceeds the global bound M");
        const double u = path.rng().uniform();
        if (u * *M < total) path.jump(next_proposal, select_target(row, total, path.rng().uniform()));
        next_proposal += path.rng().exponential(*M);
      }
    }
    path.commit();
  }
  return path.finish();
}

double coupling_discrepancy(const RateKernel& kernel, const Vector& x, Regime k) {
  const RateRow at_x = kernel.row(x, k);
  const RateRow at_0 = kernel.row(Vector::Zero(x.size()), k);
  std::map<Regime, double> diff;
  for (const auto& e : at_x) diff[e.target] += e.rate;
  for (const auto& e : at_0) diff[e.target] -= e.rate;
  double s = 0.0;
  for (const auto& [j, d] : diff) s += std::abs(d);
  return s;
}

double sup_coupling_discrepancy(const RateKernel& kernel, int dim, double h, Regime K) {
  double sup = 0.0;
  for (const auto& p : radial_grid(dim, h, K, 64, 4.0)) {
    sup = std::max(sup, coupling_discrepancy(kernel, p.x, p.i));
  }
  return sup;
}

namespace {

struct CoupledEvent {
  double rate;
  Regime alpha;
  Regime alpha_hat;
};

/// Rows of the basic coupling between Q(x) (first coordinate) and Q(0).
void coupled_events(const RateRow& row_x, const RateRow& row_0, Regime k, Regime l,
                    std::vector<CoupledEvent>& out) {
  out.clear();
  std::map<Regime, std::pair<double, double>> rates;  // j -> (q_kj(x), q_lj(0))
  for (const auto& e : row_x) rates[e.target].first += e.rate;
  for (const auto& e : row_0) rates[e.target].second += e.rate;
  for (const auto& [j, r] : rates) {
    const auto [a, b] = r;
    if (k == l || (j != k && j != l)) {
      const double common = std::min(a, b);
      if (common > 0.0) out.push_back({common, j, j});
      if (a > common) out.push_back({a - common, j, l});
      if (b > common) out.push_back({b - common, k, j});
    } else if (j == l) {
      // alpha moves onto alpha_hat's state.
      if (a > 0.0) out.push_back({a, j, l});
      if (b > 0.0) out.push_back({b, k, j});
    } else {  // j == k: alpha_hat moves onto alpha's state.
      if (b > 0.0) out.push_back({b, k, j});
      if (a > 0.0) out.push_back({a, j, l});
    }
  }
}

}  // namespace

CoupledResult simulate_coupled(const ModelSpec& spec, const SimConfig& config,
                               bool stop_at_decoupling) {
  config.validate(spec.dim);
  CoupledResult result;
  PathState path(spec, config);
  if (path.trajectory().exited) {
    result.tau_h = path.trajectory().tau_h;
    result.path = path.finish();
    return result;
  }
  const Vector zero = Vector::Zero(spec.dim);
  Regime hat = config.i0;
  RateRow row_x, row_0, flat;
  std::vector<CoupledEvent> events;

  while (!path.finished() && !(stop_at_decoupling && result.vartheta)) {
    const double t = path.time();
    const double h = path.step_length();
    path.euler(h);
    thin_interval(
        t, h,
        [&](RateRow& r) {
          spec.rate_kernel.row(path.x(), path.regime(), row_x);
          spec.rate_kernel.row(zero, hat, row_0);
          coupled_events(row_x, row_0, path.regime(), hat, events);
          // Encode events as a pseudo-row indexed by event number.
          r.clear();
          for (std::size_t e = 0; e < events.size(); ++e) {
            r.push_back({static_cast<Regime>(e), events[e].rate});
          }
        },
        path.rng(), flat,
        [&](double at, Regime event_index, const RateRow&) {
          const auto& ev = events[static_cast<std::size_t>(event_index)];
          if (ev.alpha != path.regime()) path.jump(at, ev.alpha);
          if (ev.alpha_hat != hat) {
            result.frozen_jumps.push_back({at, hat, ev.alpha_hat});
            hat = ev.alpha_hat;
          }
          if (!result.vartheta && path.regime() != hat) result.vartheta = at;
        });
    path.commit();
    if (path.trajectory().exited) break;
  }
  result.tau_h = path.trajectory().tau_h;
  // Only a decoupling before the exit counts: vartheta <= T ^ tau_h.
  result.decoupled = result.vartheta && (!result.tau_h || *result.vartheta <= *result.tau_h);
  result.path = path.finish();
  return result;
}

}  // namespace switchdiff
