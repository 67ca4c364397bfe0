#include "switchdiff/ensemble.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

#include "switchdiff/errors.hpp"

namespace switchdiff {

Functional Functional::stay_in_ball(double h) {
  Functional f;
  f.kind = Kind::stay_in_ball;
  f.h = h;
  return f;
}

Functional Functional::converges_to_zero(double tol, double h, double T) {
  Functional f;
  f.kind = Kind::converges_to_zero;
  f.tol = tol;
  f.h = h;
  f.T = T;
  return f;
}

Functional Functional::sup_ratio(double lambda, double T0, double T) {
  Functional f;
  f.kind = Kind::sup_ratio;
  f.lambda = lambda;
  f.T0 = T0;
  f.T = T;
  return f;
}

Functional Functional::occupation(Regime i) {
  Functional f;
  f.kind = Kind::occupation;
  f.regime = i;
  return f;
}

std::string Functional::name() const {
  std::ostringstream os;
  switch (kind) {
    case Kind::stay_in_ball:
      os << "stay_in_ball(h=" << h << ")";
      break;
    case Kind::converges_to_zero:
      os << "converges_to_zero(tol=" << tol << ",h=" << h << ",T=" << T << ")";
      break;
    case Kind::sup_ratio:
      os << "sup_ratio(lambda=" << lambda << ",T0=" << T0 << ",T=" << T << ")";
      break;
    case Kind::occupation:
      os << "occupation(" << regime << ")";
      break;
  }
  return os.str();
}

unsigned configured_threads() {
  if (const char* env = std::getenv("SWITCHDIFF_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::pair<double, double> wilson_interval(std::size_t successes, std::size_t n) {
  if (n == 0) return {0.0, 1.0};
  constexpr double z = 1.959963984540054;
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(successes) / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double center = (p + z2 / (2.0 * nn)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / denom;
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

double evaluate_functional(const Functional& f, const Trajectory& path, const SimConfig& config,
                           const LyapunovSpec* lyap) {
  switch (f.kind) {
    case Functional::Kind::stay_in_ball:
      return (!path.blown_up && path.max_norm < f.h) ? 1.0 : 0.0;

    case Functional::Kind::converges_to_zero: {
      if (path.blown_up || path.times.empty()) return 0.0;
      const double T = f.T > 0.0 ? f.T : config.horizon;
      if (T >= config.horizon) {
        if (path.end_time < config.horizon) return 0.0;
        return (path.max_norm < f.h && path.final_state().norm() < f.tol) ? 1.0 : 0.0;
      }
      std::size_t last = 0;
      for (std::size_t k = 0; k < path.size() && path.times[k] <= T; ++k) {
        if (path.state(k).norm() >= f.h) return 0.0;
        last = k;
      }
      return path.state(last).norm() < f.tol ? 1.0 : 0.0;
    }

    case Functional::Kind::sup_ratio: {
      if (!lyap) throw ConfigError("sup_ratio needs a Lyapunov specification");
      if (path.blown_up || path.exited) return 0.0;
      const double T = f.T > 0.0 ? f.T : config.horizon;
      for (std::size_t k = 0; k < path.size(); ++k) {
        const double t = path.times[k];
        if (t < f.T0 || t > T) continue;
        const double v = lyap->V(path.state(k));
        if (v > lyap->g.G_inverse(f.lambda * t)) return 0.0;
      }
      return 1.0;
    }

    case Functional::Kind::occupation:
      return path.occupation(f.regime, config.i0);
  }
  return 0.0;
}

EnsembleSummary run_ensemble(const ModelSpec& spec, const LyapunovSpec* lyap,
                             const SimConfig& config, const EnsembleOptions& options,
                             std::span<const Functional> functionals) {
  if (options.n_paths < 1) throw ContractError("ensemble needs at least one path");
  config.validate(spec.dim);
  for (const auto& f : functionals) {
    if (f.kind == Functional::Kind::sup_ratio && !lyap) {
      throw ConfigError("sup_ratio needs a Lyapunov specification");
    }
  }

  const std::size_t n = options.n_paths;
  const std::size_t nf = functionals.size();
  std::vector<double> values(n * nf, 0.0);
  std::vector<unsigned char> blown(n, 0), exited(n, 0);
  std::vector<Trajectory> kept(options.keep_trajectories ? n : 0);
  std::vector<std::exception_ptr> errors(n);

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t p = next.fetch_add(1); p < n; p = next.fetch_add(1)) {
      try {
        SimConfig cfg = config;
        cfg.path_index = options.first_path_index + p;
        Trajectory path = simulate(spec, cfg);
        blown[p] = path.blown_up;
        exited[p] = path.exited;
        for (std::size_t k = 0; k < nf; ++k) {
          values[p * nf + k] = evaluate_functional(functionals[k], path, cfg, lyap);
        }
        if (options.keep_trajectories) kept[p] = std::move(path);
      } catch (...) {
        errors[p] = std::current_exception();
      }
    }
  };

  const unsigned threads =
      std::max(1u, std::min<unsigned>(options.threads ? options.threads : configured_threads(),
                                      static_cast<unsigned>(n)));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  EnsembleSummary summary;
  summary.n_paths = n;
  summary.seed = config.seed;
  for (std::size_t p = 0; p < n; ++p) {
    summary.n_blowups += blown[p];
    summary.n_exited += exited[p];
  }
  const auto nn = static_cast<double>(n);
  for (std::size_t k = 0; k < nf; ++k) {
    FunctionalEstimate est;
    est.functional = functionals[k].name();
    est.n_paths = n;
    est.n_blowups = summary.n_blowups;
    est.seed = config.seed;
    double sum = 0.0, sum_sq = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      sum += values[p * nf + k];
      sum_sq += values[p * nf + k] * values[p * nf + k];
    }
    est.estimate = sum / nn;
    if (functionals[k].is_indicator()) {
      std::tie(est.ci_low, est.ci_high) =
          wilson_interval(static_cast<std::size_t>(std::llround(sum)), n);
      est.interval = "wilson";
    } else {
      const double var = n > 1 ? std::max(0.0, (sum_sq - sum * sum / nn) / (nn - 1.0)) : 0.0;
      const double half = 1.959963984540054 * std::sqrt(var / nn);
      est.ci_low = est.estimate - half;
      est.ci_high = est.estimate + half;
      est.interval = "normal";
    }
    summary.estimates.push_back(std::move(est));
  }
  summary.trajectories = std::move(kept);
  return summary;
}

}  // namespace switchdiff
