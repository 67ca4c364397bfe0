#include "switchdiff/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "switchdiff/errors.hpp"

namespace switchdiff {

namespace {

bool all_finite(const Vector& v) { return v.allFinite(); }

void require_finite(double value, const char* what, const Vector& x, Regime i) {
  if (!std::isfinite(value)) {
    std::ostringstream os;
    os << what << " is not finite at x=" << x.transpose() << ", i=" << i;
    throw EvaluationError(os.str());
  }
}

}  // namespace

RateKernel::RateKernel(RowFn row, std::optional<double> global_bound,
                       std::function<double(double)> local_bound, bool state_independent)
    : row_(std::move(row)),
      global_bound_(global_bound),
      local_bound_(std::move(local_bound)),
      state_independent_(state_independent) {}

void RateKernel::row(const Vector& x, Regime i, RateRow& out) const {
  out.clear();
  if (!row_) throw ConfigError("rate kernel has no row function");
  row_(x, i, out);
  // Consecutive intervals Delta_ij are laid out in increasing j.
  if (!std::is_sorted(out.begin(), out.end(),
                      [](const RateEntry& a, const RateEntry& b) { return a.target < b.target; })) {
    std::sort(out.begin(), out.end(),
              [](const RateEntry& a, const RateEntry& b) { return a.target < b.target; });
  }
  for (const auto& e : out) {
    if (!std::isfinite(e.rate) || e.rate < 0.0) {
      std::ostringstream os;
      os << "rate q_" << i << "," << e.target << " = " << e.rate << " is negative or not finite";
      throw EvaluationError(os.str());
    }
    if (e.target == i) throw EvaluationError("rate row lists its own diagonal entry");
  }
}

RateRow RateKernel::row(const Vector& x, Regime i) const {
  RateRow out;
  row(x, i, out);
  return out;
}

double RateKernel::total_rate(const Vector& x, Regime i) const {
  RateRow r;
  row(x, i, r);
  double s = 0.0;
  for (const auto& e : r) s += e.rate;
  return s;
}

std::optional<double> RateKernel::local_bound(double radius) const {
  if (local_bound_) return local_bound_(radius);
  return global_bound_;
}

Vector ModelSpec::eval_drift(const Vector& x, Regime i) const {
  Vector out(dim);
  drift(x, i, out);
  return out;
}

Matrix ModelSpec::eval_diffusion(const Vector& x, Regime i) const {
  Matrix out(dim, noise_dim);
  diffusion(x, i, out);
  return out;
}

LyapunovSpec square_lyapunov() {
  LyapunovSpec l;
  l.V = [](const Vector& x) { return x.squaredNorm(); };
  l.grad_V = [](const Vector& x) -> Vector { return 2.0 * x; };
  l.hess_V = [](const Vector& x) -> Matrix {
    return 2.0 * Matrix::Identity(x.size(), x.size());
  };
  l.family = "square";
  return l;
}

LyapunovSpec power_lyapunov(double p) {
  if (!(p > 0.0)) throw ConfigError("power_p Lyapunov function needs p > 0");
  LyapunovSpec l;
  l.V = [p](const Vector& x) { return std::pow(x.norm(), p); };
  l.grad_V = [p](const Vector& x) -> Vector {
    const double r = x.norm();
    return p * std::pow(r, p - 2.0) * x;
  };
  l.hess_V = [p](const Vector& x) -> Matrix {
    const double r = x.norm();
    const auto n = x.size();
    Matrix h = Matrix::Identity(n, n);
    h += (p - 2.0) * (x * x.transpose()) / (r * r);
    return p * std::pow(r, p - 2.0) * h;
  };
  l.family = "power_p";
  return l;
}

double fd_step(const Vector& x) { return std::max(1e-6, 1e-6 * x.norm()); }

Vector fd_gradient(const std::function<double(const Vector&)>& f, const Vector& x) {
  const double eta = fd_step(x);
  Vector g(x.size());
  Vector xp = x;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    xp[k] = x[k] + eta;
    const double fp = f(xp);
    xp[k] = x[k] - eta;
    const double fm = f(xp);
    xp[k] = x[k];
    g[k] = (fp - fm) / (2.0 * eta);
  }
  return g;
}

Matrix fd_hessian(const std::function<double(const Vector&)>& f, const Vector& x) {
  // Second differences lose eps/eta^2; 1e-4 keeps that near 1e-8.
  const double eta = std::max(1e-4, 1e-4 * x.norm());
  const auto n = x.size();
  Matrix h(n, n);
  const double f0 = f(x);
  Vector xp = x;
  for (Eigen::Index a = 0; a < n; ++a) {
    xp[a] = x[a] + eta;
    const double fp = f(xp);
    xp[a] = x[a] - eta;
    const double fm = f(xp);
    xp[a] = x[a];
    h(a, a) = (fp - 2.0 * f0 + fm) / (eta * eta);
    for (Eigen::Index b = a + 1; b < n; ++b) {
      xp[a] = x[a] + eta;
      xp[b] = x[b] + eta;
      const double fpp = f(xp);
      xp[b] = x[b] - eta;
      const double fpm = f(xp);
      xp[a] = x[a] - eta;
      const double fmm = f(xp);
      xp[b] = x[b] + eta;
      const double fmp = f(xp);
      xp[a] = x[a];
      xp[b] = x[b];
      h(a, b) = h(b, a) = (fpp - fpm - fmp + fmm) / (4.0 * eta * eta);
    }
  }
  return h;
}

Vector gradient_of(const LyapunovSpec& lyap, const Vector& x) {
  return lyap.grad_V ? lyap.grad_V(x) : fd_gradient(lyap.V, x);
}

Matrix hessian_of(const LyapunovSpec& lyap, const Vector& x) {
  return lyap.hess_V ? lyap.hess_V(x) : fd_hessian(lyap.V, x);
}

namespace {

double diffusion_part(const Vector& grad, const Matrix& hess, const Vector& b, const Matrix& sigma) {
  const Matrix a = sigma * sigma.transpose();
  return grad.dot(b) + 0.5 * (hess.cwiseProduct(a)).sum();
}

}  // namespace

double apply_generator_Li(const ModelSpec& spec, const LyapunovSpec& lyap, const Vector& x,
                          Regime i) {
  if (x.norm() == 0.0) throw DomainError("L_i V is evaluated away from the origin only");
  const Vector b = spec.eval_drift(x, i);
  const Matrix s = spec.eval_diffusion(x, i);
  if (!all_finite(b) || !s.allFinite()) {
    std::ostringstream os;
    os << "coefficients not finite at x=" << x.transpose() << ", i=" << i;
    throw EvaluationError(os.str());
  }
  const double v = diffusion_part(gradient_of(lyap, x), hessian_of(lyap, x), b, s);
  require_finite(v, "L_i V", x, i);
  return v;
}

double apply_full_generator(const ModelSpec& spec,
                            const std::function<double(const Vector&, Regime)>& f,
                            const Vector& x, Regime i) {
  const Vector b = spec.eval_drift(x, i);
  const Matrix s = spec.eval_diffusion(x, i);
  if (!all_finite(b) || !s.allFinite()) throw EvaluationError("coefficients not finite");
  const std::function<double(const Vector&)> fi = [&](const Vector& y) { return f(y, i); };
  double v = diffusion_part(fd_gradient(fi, x), fd_hessian(fi, x), b, s);
  const double here = f(x, i);
  RateRow row;
  spec.rate_kernel.row(x, i, row);
  for (const auto& e : row) v += e.rate * (f(x, e.target) - here);
  require_finite(v, "L f", x, i);
  return v;
}

DriftConditionReport verify_drift_condition(const ModelSpec& spec, const LyapunovSpec& lyap,
                                            std::span<const GridPoint> grid,
                                            DriftDirection direction, double tolerance) {
  DriftConditionReport report;
  report.direction = direction;
  report.tolerance = tolerance;
  for (const auto& p : grid) {
    const double lv = apply_generator_Li(spec, lyap, p.x, p.i);
    const double bound = lyap.c(p.i) * lyap.g.g(lyap.V(p.x));
    const double residual = direction == DriftDirection::upper ? lv - bound : bound - lv;
    ++report.n_checked;
    report.max_residual = std::max(report.max_residual, residual);
    if (residual > tolerance) report.violations.push_back({p.x, p.i, residual});
  }
  return report;
}

std::vector<Vector> probe_directions(int dim) {
  std::vector<Vector> dirs;
  for (int k = 0; k < dim; ++k) dirs.push_back(Vector::Unit(dim, k));
  if (dim > 1) {
    dirs.push_back(Vector::Ones(dim).normalized());
    Vector alt(dim);
    for (int k = 0; k < dim; ++k) alt[k] = (k % 2 == 0) ? 1.0 : -1.0;
    dirs.push_back(alt.normalized());
  }
  return dirs;
}

std::vector<GridPoint> radial_grid(int dim, double radius, Regime max_regime, int points_per_ray,
                                   double decades, bool both_signs) {
  std::vector<GridPoint> grid;
  const auto dirs = probe_directions(dim);
  for (Regime i = 1; i <= max_regime; ++i) {
    for (const auto& d : dirs) {
      for (int k = 0; k < points_per_ray; ++k) {
        const double frac = points_per_ray == 1 ? 0.0 : double(k) / (points_per_ray - 1);
        const double r = radius * std::pow(10.0, -decades * frac);
        grid.push_back({r * d, i});
        if (both_signs) grid.push_back({-r * d, i});
      }
    }
  }
  return grid;
}

ModelCheck validate_model(const ModelSpec& spec, std::span<const GridPoint> grid) {
  ModelCheck check;
  if (spec.dim < 1 || spec.noise_dim < 1) check.problems.push_back("dimensions must be positive");
  if (!spec.drift || !spec.diffusion) check.problems.push_back("missing drift or diffusion");
  if (!spec.rate_kernel) check.problems.push_back("missing rate kernel");
  if (!check.ok()) return check;

  std::vector<Regime> regimes;
  for (const auto& p : grid) regimes.push_back(p.i);
  std::sort(regimes.begin(), regimes.end());
  regimes.erase(std::unique(regimes.begin(), regimes.end()), regimes.end());

  const Vector zero = Vector::Zero(spec.dim);
  if (spec.zero_fixed) {
    for (Regime i : regimes) {
      if (spec.eval_drift(zero, i).norm() != 0.0 || spec.eval_diffusion(zero, i).norm() != 0.0) {
        check.problems.push_back("b(0," + std::to_string(i) + ") or sigma(0," +
                                 std::to_string(i) + ") is nonzero");
      }
    }
  }
  RateRow row;
  for (const auto& p : grid) {
    if (!spec.eval_drift(p.x, p.i).allFinite() || !spec.eval_diffusion(p.x, p.i).allFinite()) {
      check.problems.push_back("non-finite coefficients at regime " + std::to_string(p.i));
      continue;
    }
    try {
      spec.rate_kernel.row(p.x, p.i, row);
    } catch (const EvaluationError& e) {
      check.problems.push_back(e.what());
      continue;
    }
    double off = 0.0;
    for (const auto& e : row) off += e.rate;
    const double diag = -off;
    check.max_row_sum_error = std::max(check.max_row_sum_error, std::abs(off + diag));
    if (auto m = spec.rate_kernel.local_bound(p.x.norm()); m && off > *m * (1.0 + 1e-12)) {
      check.problems.push_back("q_" + std::to_string(p.i) + "(x) exceeds the declared bound");
    }
  }
  return check;
}

ModelCheck validate_lyapunov(const LyapunovSpec& lyap, std::span<const GridPoint> grid) {
  ModelCheck check;
  if (!lyap.V || !lyap.c) {
    check.problems.push_back("Lyapunov spec needs V and c");
    return check;
  }
  if (!grid.empty()) {
    const Vector zero = Vector::Zero(grid.front().x.size());
    if (lyap.V(zero) != 0.0) check.problems.push_back("V(0) != 0");
  }
  for (const auto& p : grid) {
    if (p.x.norm() > 0.0 && !(lyap.V(p.x) > 0.0)) {
      check.problems.push_back("V is not positive away from 0");
      break;
    }
  }
  for (const auto& p : grid) {
    if (std::abs(lyap.c(p.i)) > lyap.c_bound * (1.0 + 1e-12)) {
      check.problems.push_back("|c_" + std::to_string(p.i) + "| exceeds c_bound");
      break;
    }
  }
  if (auto msg = lyap.g.check_family()) check.problems.push_back(*msg);
  return check;
}

}  // namespace switchdiff
