#include "switchdiff/markov_chain.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>

#include "switchdiff/errors.hpp"

namespace switchdiff {

TruncatedChain truncate(const RateKernel& kernel, Eigen::Index N, TruncationMode mode,
                        std::optional<Vector> at, int dim) {
  if (N < 2) throw ContractError("truncation needs N >= 2");
  const Vector x = at.value_or(Vector::Zero(dim));
  TruncatedChain chain;
  chain.Q = Matrix::Zero(N, N);
  chain.lumped_tail = mode == TruncationMode::lump;
  RateRow row;
  for (Eigen::Index r = 0; r < N; ++r) {
    const Regime i = r + 1;
    kernel.row(x, i, row);
    double outside = 0.0;
    for (const auto& e : row) {
      if (e.target <= N) {
        chain.Q(r, e.target - 1) += e.rate;
      } else {
        outside += e.rate;
      }
    }
    if (mode == TruncationMode::lump) {
      // Redirected to state N; for row N itself that is a self-loop.
      if (r != N - 1) chain.Q(r, N - 1) += outside;
      chain.lumped_mass = std::max(chain.lumped_mass, outside);
    } else {
      chain.truncation_leak = std::max(chain.truncation_leak, outside);
    }
    chain.Q(r, r) = 0.0;
    chain.Q(r, r) = -chain.Q.row(r).sum();
  }
  return chain;
}

TruncatedChain exact_chain(Matrix Q) {
  if (Q.rows() != Q.cols() || Q.rows() < 1) throw ContractError("generator must be square");
  TruncatedChain chain;
  chain.Q = std::move(Q);
  return chain;
}

namespace {

std::vector<bool> reachable(const Matrix& Q, bool forward) {
  const auto n = Q.rows();
  std::vector<bool> seen(static_cast<std::size_t>(n), false);
  std::deque<Eigen::Index> queue{0};
  seen[0] = true;
  while (!queue.empty()) {
    const auto u = queue.front();
    queue.pop_front();
    for (Eigen::Index v = 0; v < n; ++v) {
      const double rate = forward ? Q(u, v) : Q(v, u);
      if (v != u && rate > 0.0 && !seen[static_cast<std::size_t>(v)]) {
        seen[static_cast<std::size_t>(v)] = true;
        queue.push_back(v);
      }
    }
  }
  return seen;
}

}  // namespace

bool is_irreducible(const Matrix& Q) {
  if (Q.rows() == 1) return true;
  const auto fwd = reachable(Q, true);
  const auto bwd = reachable(Q, false);
  return std::all_of(fwd.begin(), fwd.end(), [](bool b) { return b; }) &&
         std::all_of(bwd.begin(), bwd.end(), [](bool b) { return b; });
}

double InvariantMeasure::unresolved_mass() const {
  const double resolved = nu.head(resolved_size()).sum();
  return std::max(0.0, 1.0 - resolved);
}

InvariantMeasure invariant_measure(const TruncatedChain& chain) {
  const auto n = chain.size();
  if (!is_irreducible(chain.Q)) {
    throw StructuralError("truncated chain is reducible; no unique invariant measure");
  }
  Matrix A = chain.Q.transpose();
  A.row(n - 1).setOnes();
  Vector rhs = Vector::Zero(n);
  rhs[n - 1] = 1.0;
  Vector nu = A.partialPivLu().solve(rhs);
  if (!nu.allFinite()) throw NumericError("invariant-measure solve produced non-finite values");
  if (nu.minCoeff() < -1e-12) {
    std::ostringstream os;
    os << "invariant-measure solve produced a negative entry " << nu.minCoeff();
    throw NumericError(os.str());
  }
  nu = nu.cwiseMax(0.0);
  nu /= nu.sum();

  InvariantMeasure m;
  m.residual = (nu.transpose() * chain.Q).cwiseAbs().maxCoeff();
  m.nu = std::move(nu);
  m.truncation_size = n;
  m.lumped_tail = chain.lumped_tail;
  if (m.residual > 1e-10) {
    std::ostringstream os;
    os << "invariant-measure residual " << m.residual << " above 1e-10";
    throw NumericError(os.str());
  }
  return m;
}

BirthDeathMeasure birth_death_invariant(std::span<const double> check_p,
                                        std::span<const double> hat_p, Eigen::Index K) {
  if (K < 2) throw ContractError("birth-death measure needs K >= 2");
  if (check_p.empty() || hat_p.empty()) throw ContractError("rate sequences are empty");
  // Sequences shorter than needed repeat their last value.
  auto up = [&](Eigen::Index i) {  // check_p_i, i >= 1
    const auto k = static_cast<std::size_t>(i - 1);
    return k < check_p.size() ? check_p[k] : check_p.back();
  };
  auto down = [&](Eigen::Index i) {  // hat_p_i, i >= 2
    const auto k = static_cast<std::size_t>(i - 1);
    return k < hat_p.size() ? hat_p[k] : hat_p.back();
  };
  for (Eigen::Index i = 2; i <= K + 1; ++i) {
    if (!(down(i) > 0.0)) throw ContractError("hat_p must be positive for every state >= 2");
  }

  Vector weight(K);
  weight[0] = 1.0;
  for (Eigen::Index k = 2; k <= K; ++k) weight[k - 1] = weight[k - 2] * up(k - 1) / down(k);

  // Tail-ratio test over the last quarter of the computed terms.
  const Eigen::Index first = std::max<Eigen::Index>(1, K - std::max<Eigen::Index>(1, K / 4));
  double ratio = 0.0;
  for (Eigen::Index k = first; k <= K; ++k) ratio = std::max(ratio, up(k) / down(k + 1));
  BirthDeathMeasure out;
  out.nu_star = weight.tail(K - 1).sum();
  const double total = weight.sum();
  if (ratio >= 1.0) {
    std::ostringstream os;
    os << "birth-death product sum diverges (tail ratio " << ratio << " >= 1)";
    throw ErgodicityError(os.str());
  }
  out.tail_bound = weight[K - 1] * ratio / (1.0 - ratio);
  if (out.tail_bound > 1e-8 * total) {
    std::ostringstream os;
    os << "birth-death product sum not resolved at K=" << K << " (tail bound "
       << out.tail_bound / total << " relative); increase K";
    throw ErgodicityError(os.str());
  }
  out.printed_normalization_sum = (1.0 + out.nu_star) / out.nu_star;
  out.normalization = "nu_1 = 1/(1+nu*), nu_k = nu_1 * prod_{l=2}^k check_{l-1}/hat_l";

  out.measure.nu = weight / total;
  out.measure.truncation_size = K;

  // Same K states as a reflecting birth-death generator: its invariant law
  // is exactly the renormalized product form.
  Matrix Q = Matrix::Zero(K, K);
  for (Eigen::Index i = 1; i <= K; ++i) {
    if (i < K) Q(i - 1, i) = up(i);
    if (i > 1) Q(i - 1, i - 2) = down(i);
    Q(i - 1, i - 1) = -Q.row(i - 1).sum();
  }
  out.measure.residual = (out.measure.nu.transpose() * Q).cwiseAbs().maxCoeff();
  try {
    const auto solved = invariant_measure(exact_chain(Q));
    out.cross_check_error = (solved.nu - out.measure.nu).cwiseAbs().maxCoeff();
  } catch (const StructuralError&) {
    // A zero up-rate disconnects the states above it; their mass is zero.
    out.cross_check_error = 0.0;
  }
  return out;
}

Matrix transition_matrix(const TruncatedChain& chain, double t) {
  if (t < 0.0) throw ContractError("transition matrix needs t >= 0");
  const auto n = chain.size();
  const Matrix I = Matrix::Identity(n, n);
  const double Lambda = chain.Q.diagonal().cwiseAbs().maxCoeff();
  if (t == 0.0 || Lambda == 0.0) return I;

  // Keep Lambda * tau moderate, then square back up: P(t) = P(t / 2^s)^(2^s).
  int squarings = 0;
  double tau = t;
  while (Lambda * tau > 8.0) {
    tau *= 0.5;
    ++squarings;
  }
  const Matrix step = I + chain.Q / Lambda;
  const double mean = Lambda * tau;
  double weight = std::exp(-mean);
  double cumulative = weight;
  Matrix power = I;
  Matrix P = weight * I;
  constexpr int kMaxTerms = 2000;
  int k = 0;
  while (1.0 - cumulative >= 1e-14) {
    if (++k > kMaxTerms) throw NumericError("uniformization series did not converge");
    power = power * step;
    weight *= mean / k;
    cumulative += weight;
    P.noalias() += weight * power;
    if (weight == 0.0 && k > mean) break;
  }
  for (int s = 0; s < squarings; ++s) P = P * P;
  return P;
}

std::string to_string(ErgodicityDiagnostic::Verdict v) {
  switch (v) {
    case ErgodicityDiagnostic::Verdict::exponentially_ergodic:
      return "strongly_exponentially_ergodic";
    case ErgodicityDiagnostic::Verdict::mixed:
      return "mixed";
    case ErgodicityDiagnostic::Verdict::inconclusive:
      return "inconclusive";
  }
  return "inconclusive";
}

std::vector<double> default_ergodicity_times() {
  std::vector<double> times;
  for (int k = 1; k <= 40; ++k) times.push_back(0.5 * k);
  return times;
}

ErgodicityDiagnostic ergodicity_diagnostic(const TruncatedChain& chain,
                                           const InvariantMeasure& nu,
                                           std::span<const double> times) {
  if (times.size() < 2) throw ContractError("ergodicity fit needs at least two time points");
  if (nu.nu.size() != chain.size()) throw ContractError("measure and chain sizes differ");
  ErgodicityDiagnostic diag;
  diag.times.assign(times.begin(), times.end());
  const Eigen::RowVectorXd target = nu.nu.transpose();
  for (double t : times) {
    const Matrix P = transition_matrix(chain, t);
    double d = 0.0;
    for (Eigen::Index i = 0; i < P.rows(); ++i) {
      d = std::max(d, (P.row(i) - target).cwiseAbs().sum());
    }
    diag.distance.push_back(d);
  }

  // Fit on the latter half of the stretch before d(t) reaches round-off;
  // beyond that point the values carry no slope.
  constexpr double kFitFloor = 1e-10;
  std::size_t end = 0;
  while (end < times.size() && diag.distance[end] > kFitFloor) ++end;
  const bool reached_floor = end < times.size();
  std::size_t begin = end / 2;
  if (end - begin < 3) begin = 0;
  std::vector<double> ts, ys;
  for (std::size_t k = begin; k < end; ++k) {
    if (times[k] <= 0.0) continue;
    ts.push_back(times[k]);
    ys.push_back(std::log(diag.distance[k]));
  }
  diag.fit_points = ts.size();
  if (ts.size() < 2) {
    diag.verdict = reached_floor ? ErgodicityDiagnostic::Verdict::mixed
                             : ErgodicityDiagnostic::Verdict::inconclusive;
    return diag;
  }
  const auto m = static_cast<double>(ts.size());
  double st = 0, sy = 0, stt = 0, sty = 0;
  for (std::size_t k = 0; k < ts.size(); ++k) {
    st += ts[k];
    sy += ys[k];
    stt += ts[k] * ts[k];
    sty += ts[k] * ys[k];
  }
  const double denom = m * stt - st * st;
  if (denom <= 0.0) {
    diag.verdict = ErgodicityDiagnostic::Verdict::inconclusive;
    return diag;
  }
  const double slope = (m * sty - st * sy) / denom;
  const double intercept = (sy - slope * st) / m;
  const double mean_y = sy / m;
  double ss_res = 0, ss_tot = 0;
  for (std::size_t k = 0; k < ts.size(); ++k) {
    const double fit = intercept + slope * ts[k];
    ss_res += (ys[k] - fit) * (ys[k] - fit);
    ss_tot += (ys[k] - mean_y) * (ys[k] - mean_y);
  }
  diag.lambda = -slope;
  diag.C = std::exp(intercept);
  diag.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
  diag.verdict = (diag.lambda > 0.0 && diag.r_squared > 0.99)
                     ? ErgodicityDiagnostic::Verdict::exponentially_ergodic
                     : ErgodicityDiagnostic::Verdict::inconclusive;
  return diag;
}

PoissonSolution solve_poisson(const TruncatedChain& chain, const InvariantMeasure& nu,
                              const Vector& b, bool project) {
  const auto n = chain.size();
  if (b.size() != n || nu.nu.size() != n) throw ContractError("Poisson equation sizes differ");
  PoissonSolution sol;
  Vector rhs = b;
  const double mean = nu.nu.dot(b);
  if (std::abs(mean) > 1e-10) {
    if (!project) {
      std::ostringstream os;
      os << "Poisson right-hand side has nu.b = " << mean << " (must vanish)";
      throw ContractError(os.str());
    }
    rhs.array() -= mean;
    sol.projection = mean;
  }
  // (Q - 1 nu) gamma = rhs forces nu.gamma = 0 and then Q gamma = rhs.
  const Matrix A = chain.Q - Vector::Ones(n) * nu.nu.transpose();
  const auto lu = A.partialPivLu();
  Vector gamma = lu.solve(rhs);
  gamma += lu.solve(rhs - A * gamma);
  sol.residual = (chain.Q * gamma - rhs).cwiseAbs().maxCoeff();
  sol.gamma = std::move(gamma);
  if (!(sol.residual < 1e-8 * std::max(1.0, rhs.cwiseAbs().maxCoeff()))) {
    std::ostringstream os;
    os << "Poisson solve residual " << sol.residual << " above tolerance";
    throw NumericError(os.str());
  }
  return sol;
}

}  // namespace switchdiff
