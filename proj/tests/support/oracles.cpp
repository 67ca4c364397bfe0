#include "oracles.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <array>
#include <cmath>

namespace oracle {

Matrix expm(const Matrix& Q, double t) { return (Q * t).exp(); }

Vector integrated_semigroup(const Matrix& Q, const Vector& b, double T, int panels) {
  static constexpr std::array<double, 8> x{-0.9602898564975363, -0.7966664774136267,
                                           -0.5255324099163290, -0.1834346424956498,
                                           0.1834346424956498,  0.5255324099163290,
                                           0.7966664774136267,  0.9602898564975363};
  static constexpr std::array<double, 8> w{0.1012285362903763, 0.2223810344533745,
                                           0.3137066458778873, 0.3626837833783620,
                                           0.3626837833783620, 0.3137066458778873,
                                           0.2223810344533745, 0.1012285362903763};
  Vector acc = Vector::Zero(b.size());
  const double hw = T / panels;
  for (int p = 0; p < panels; ++p) {
    const double mid = (p + 0.5) * hw;
    for (std::size_t k = 0; k < x.size(); ++k) {
      acc += w[k] * 0.5 * hw * (expm(Q, mid + 0.5 * hw * x[k]) * b);
    }
  }
  return -acc;
}

Matrix two_state_transition(double a, double b, double t) {
  const double s = a + b, e = std::exp(-s * t);
  Matrix P(2, 2);
  P << (b + a * e) / s, (a - a * e) / s, (b - b * e) / s, (a + b * e) / s;
  return P;
}

double sym2_max(double p, double q, double r) {
  return 0.5 * (p + r) + std::sqrt(0.25 * (p - r) * (p - r) + q * q);
}

double sym2_min(double p, double q, double r) {
  return 0.5 * (p + r) - std::sqrt(0.25 * (p - r) * (p - r) + q * q);
}

double alternating_geometric(int N) {
  double s = 0.0, term = 1.0;
  for (int i = 1; i <= N; ++i) {
    term *= -0.5;
    s += term;
  }
  return s;
}

double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf) {
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const double F = cdf(samples[k]);
    d = std::max({d, (k + 1) / n - F, F - k / n});
  }
  return d;
}

double ks_critical_1pct(std::size_t n) { return 1.6276 / std::sqrt(static_cast<double>(n)); }

double two_state_occupation_sd(double a, double b, double T) {
  const double p1 = b / (a + b), p2 = a / (a + b);
  return std::sqrt(2.0 * p1 * p2 / ((a + b) * T));
}

}  // namespace oracle
