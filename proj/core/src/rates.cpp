#include "switchdiff/rates.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "switchdiff/errors.hpp"
#include "switchdiff/simulator.hpp"

namespace switchdiff {

RateProfile::RateProfile(Kind kind, double h, double gamma, std::function<double(double)> g,
                         std::string label)
    : kind_(kind), h_(h), gamma_(gamma), g_(std::move(g)), label_(std::move(label)) {
  if (!(h_ > 0.0) || !std::isfinite(h_)) throw ConfigError("rate profile needs h > 0");
}

RateProfile RateProfile::identity(double h) {
  return RateProfile(Kind::identity, h, 0.0, nullptr, "identity");
}

RateProfile RateProfile::power(double gamma, double h) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("power profile needs gamma in (0, 1)");
  return RateProfile(Kind::power_1_plus_gamma, h, gamma, nullptr, "power_1_plus_gamma");
}

RateProfile RateProfile::custom(std::function<double(double)> g, double h, std::string label) {
  if (!g) throw ConfigError("custom profile needs a function");
  return RateProfile(Kind::custom, h, 0.0, std::move(g), std::move(label));
}

double RateProfile::g(double y) const {
  switch (kind_) {
    case Kind::identity:
      return y;
    case Kind::power_1_plus_gamma:
      return y <= 0.0 ? 0.0 : std::pow(y, 1.0 + gamma_);
    case Kind::custom:
      return g_(y);
  }
  return 0.0;
}

namespace {

void check_G_domain(double y, double h) {
  if (!(y > 0.0) || y > h) {
    std::ostringstream os;
    os << "G(y) needs 0 < y <= h; got y=" << y << ", h=" << h;
    throw DomainError(os.str());
  }
}

}  // namespace

double RateProfile::G_quadrature(double y) const {
  check_G_domain(y, h_);
  if (y == h_) return 0.0;
  if (y < kQuadratureFloor) return -std::numeric_limits<double>::infinity();
  // u = ln z turns dz/g(z) into z/g(z) du, which stays bounded for g ~ z^p
  // near zero and keeps the integrand smooth across decades.
  auto integrand = [this](double u) {
    const double z = std::exp(u);
    return z / g(z);
  };
  double error = 0.0;
  const double value = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
      integrand, std::log(y), std::log(h_), 20, 1e-13, &error);
  return -value;
}

double RateProfile::G(double y) const {
  check_G_domain(y, h_);
  switch (kind_) {
    case Kind::identity:
      return std::log(y / h_);
    case Kind::power_1_plus_gamma:
      return (std::pow(h_, -gamma_) - std::pow(y, -gamma_)) / gamma_;
    case Kind::custom:
      return G_quadrature(y);
  }
  return 0.0;
}

double RateProfile::G_inverse_bisection(double t) const {
  if (t < 0.0) throw DomainError("G^{-1}(-t) needs t >= 0");
  if (t == 0.0) return h_;
  const double target = -t;
  // Bracket in log-space: walk the lower end down until G drops below -t.
  double hi = std::log(h_);
  double step = 1.0;
  double lo = hi - step;
  const double floor_u = std::log(kQuadratureFloor);
  while (lo > floor_u && G(std::exp(lo)) > target) {
    hi = lo;
    step *= 2.0;
    lo = std::max(floor_u, lo - step);
  }
  if (lo <= floor_u && G(std::exp(floor_u)) > target) return kQuadratureFloor;
  // Run to the resolution of the log-abscissa; |G(y) + t| then sits far
  // below 1e-10 * max(1, t) for every profile in the family.
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (G(std::exp(mid)) > target) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return std::exp(0.5 * (lo + hi));
}

double RateProfile::G_inverse(double t) const {
  if (t < 0.0) throw DomainError("G^{-1}(-t) needs t >= 0");
  switch (kind_) {
    case Kind::identity:
      return h_ * std::exp(-t);
    case Kind::power_1_plus_gamma:
      return std::pow(std::pow(h_, -gamma_) + gamma_ * t, -1.0 / gamma_);
    case Kind::custom:
      return G_inverse_bisection(t);
  }
  return h_;
}

std::optional<double> RateProfile::G_unscaled_convention(double y) const {
  if (kind_ != Kind::power_1_plus_gamma) return std::nullopt;
  check_G_domain(y, h_);
  return std::pow(h_, -gamma_) - std::pow(y, -gamma_);
}

std::optional<std::string> RateProfile::check_family() const {
  if (g(0.0) != 0.0) return "g(0) != 0";
  constexpr int kSamples = 512;
  double prev = 0.0;
  for (int k = 1; k <= kSamples; ++k) {
    const double y = double(k) / kSamples;
    const double v = g(y);
    if (!std::isfinite(v)) return "g is not finite on [0, 1]";
    if (!(v > prev)) {
      std::ostringstream os;
      os << "g is not strictly increasing near y=" << y;
      return os.str();
    }
    prev = v;
  }
  return std::nullopt;
}

std::vector<double> default_lambda_grid() {
  constexpr int kPoints = 64;
  std::vector<double> grid(kPoints);
  for (int k = 0; k < kPoints; ++k) grid[k] = std::pow(10.0, -4.0 + 6.0 * k / (kPoints - 1));
  return grid;
}

PathwiseRateEstimate estimate_pathwise_rate(std::span<const Trajectory> paths,
                                            const std::function<double(const Vector&)>& V,
                                            const RateProfile& profile,
                                            std::optional<double> T0, double epsilon,
                                            std::span<const double> lambda_grid) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw ContractError("epsilon must lie in (0, 1)");
  std::vector<double> owned;
  if (lambda_grid.empty()) {
    owned = default_lambda_grid();
    lambda_grid = owned;
  }

  PathwiseRateEstimate est;
  est.n_paths = paths.size();
  std::vector<const Trajectory*> alive;
  for (const auto& p : paths) {
    if (p.exited || p.blown_up || p.times.empty()) {
      ++est.n_excluded;
    } else {
      alive.push_back(&p);
    }
  }
  est.n_surviving = alive.size();
  if (alive.empty()) {
    throw EstimationError("no surviving paths (" + std::to_string(est.n_excluded) +
                          " of " + std::to_string(est.n_paths) + " exited or blew up)");
  }
  double T = std::numeric_limits<double>::infinity();
  for (const auto* p : alive) T = std::min(T, p->times.back());
  est.T = T;
  est.T0 = T0.value_or(T / 4.0);
  if (!(est.T0 < T)) throw ContractError("T0 must be below the horizon");

  // Per path: V along the window, reused for every lambda.
  struct Window {
    std::vector<double> t;
    std::vector<double> v;
  };
  std::vector<Window> windows;
  windows.reserve(alive.size());
  for (const auto* p : alive) {
    Window w;
    for (std::size_t k = 0; k < p->times.size(); ++k) {
      const double t = p->times[k];
      if (t < est.T0 || t > T) continue;
      w.t.push_back(t);
      w.v.push_back(V(p->state(k)));
    }
    windows.push_back(std::move(w));
  }

  const auto rank = static_cast<std::size_t>(
      std::ceil((1.0 - epsilon) * static_cast<double>(alive.size())));
  const std::size_t q_index = std::clamp<std::size_t>(rank, 1, alive.size()) - 1;

  std::vector<double> ratios(alive.size());
  for (std::size_t li = 0; li < lambda_grid.size(); ++li) {
    const double lambda = lambda_grid[li];
    for (std::size_t p = 0; p < windows.size(); ++p) {
      double sup = 0.0;
      for (std::size_t k = 0; k < windows[p].t.size(); ++k) {
        const double v = windows[p].v[k];
        if (v == 0.0) continue;
        const double envelope = profile.G_inverse(lambda * windows[p].t[k]);
        const double r = envelope > 0.0 ? v / envelope : std::numeric_limits<double>::infinity();
        sup = std::max(sup, r);
      }
      ratios[p] = sup;
    }
    std::nth_element(ratios.begin(), ratios.begin() + static_cast<std::ptrdiff_t>(q_index),
                     ratios.end());
    const double q = ratios[q_index];
    est.curve.push_back({lambda, q, alive.size()});
    if (q <= 1.0) {
      est.found = true;
      est.lambda_hat = lambda;
      est.resolution = li + 1 < lambda_grid.size() ? lambda_grid[li + 1] / lambda
                                                   : (li > 0 ? lambda / lambda_grid[li - 1] : 1.0);
    }
  }
  return est;
}

}  // namespace switchdiff
