#include "switchdiff/tools/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "presets.hpp"

namespace switchdiff::tools {

using nlohmann::json;

namespace {

using Path = std::vector<std::string>;

std::string join(const Path& p) {
  std::string s;
  for (const auto& t : p) {
    if (!s.empty()) s += '.';
    s += t;
  }
  return s.empty() ? "<root>" : s;
}

bool is_index(const std::string& t) {
  return !t.empty() && std::all_of(t.begin(), t.end(), [](char c) { return c >= '0' && c <= '9'; });
}

// Line of the deepest key along `path` that can be located in the text.
std::size_t line_of(std::string_view text, const Path& path) {
  std::size_t pos = 0, found = std::string_view::npos;
  for (const auto& t : path) {
    if (is_index(t)) continue;
    const auto p = text.find("\"" + t + "\"", pos);
    if (p == std::string_view::npos) break;
    found = pos = p;
  }
  if (found == std::string_view::npos) return 1;
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + found, '\n'));
}

class Reader {
 public:
  Reader(std::string_view text, std::string source) : text_(text), source_(std::move(source)) {}

  [[noreturn]] void fail(const Path& p, const std::string& msg) const {
    throw ScenarioError(source_ + ":" + std::to_string(line_of(text_, p)) + ": " + join(p) +
                        ": " + msg);
  }

  void allow(const json& obj, const Path& p, std::initializer_list<const char*> keys) const {
    if (!obj.is_object()) fail(p, "expected an object");
    std::set<std::string> ok(keys.begin(), keys.end());
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      if (!ok.count(it.key())) fail(sub(p, it.key()), "unknown key");
    }
  }

  static Path sub(const Path& p, const std::string& k) {
    Path q = p;
    q.push_back(k);
    return q;
  }

  const json& need(const json& obj, const Path& p, const std::string& key) const {
    if (!obj.is_object() || !obj.contains(key)) fail(sub(p, key), "required key missing");
    return obj.at(key);
  }

  double number(const json& v, const Path& p) const {
    if (!v.is_number()) fail(p, "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) fail(p, "expected a finite number");
    return d;
  }

  double number(const json& obj, const Path& p, const std::string& key,
                std::optional<double> fallback = std::nullopt) const {
    if (obj.contains(key)) return number(obj.at(key), sub(p, key));
    if (!fallback) fail(sub(p, key), "required key missing");
    return *fallback;
  }

  double positive(const json& obj, const Path& p, const std::string& key,
                  std::optional<double> fallback = std::nullopt) const {
    const double v = number(obj, p, key, fallback);
    if (!(v > 0.0)) fail(sub(p, key), "must be positive");
    return v;
  }

  std::uint64_t unsigned_int(const json& obj, const Path& p, const std::string& key,
                             std::uint64_t fallback) const {
    if (!obj.contains(key)) return fallback;
    const auto& v = obj.at(key);
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
      fail(sub(p, key), "expected a non-negative integer");
    }
    return v.get<std::uint64_t>();
  }

  std::string string(const json& obj, const Path& p, const std::string& key,
                     std::optional<std::string> fallback = std::nullopt) const {
    if (!obj.contains(key)) {
      if (!fallback) fail(sub(p, key), "required key missing");
      return *fallback;
    }
    if (!obj.at(key).is_string()) fail(sub(p, key), "expected a string");
    return obj.at(key).get<std::string>();
  }

  std::vector<double> numbers(const json& v, const Path& p) const {
    if (!v.is_array()) fail(p, "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t k = 0; k < v.size(); ++k) out.push_back(number(v[k], sub(p, std::to_string(k))));
    return out;
  }

  // number | [v1, v2, ...] (tail repeats the last) | {"values": [...], "tail": t}
  Sequence sequence(const json& v, const Path& p) const {
    Sequence s;
    if (v.is_number()) return Sequence::constant(number(v, p));
    if (v.is_array()) {
      s.values = numbers(v, p);
      if (s.values.empty()) fail(p, "sequence needs at least one value");
      s.tail = s.values.back();
      return s;
    }
    if (!v.is_object()) fail(p, "expected a number, array or {values, tail}");
    allow(v, p, {"values", "tail"});
    if (v.contains("values")) s.values = numbers(v.at("values"), sub(p, "values"));
    if (v.contains("tail")) {
      s.tail = number(v.at("tail"), sub(p, "tail"));
    } else if (!s.values.empty()) {
      s.tail = s.values.back();
    } else {
      fail(p, "sequence needs values or a tail");
    }
    return s;
  }

  Matrix matrix(const json& v, const Path& p, int n, int m) const {
    if (!v.is_array() || static_cast<int>(v.size()) != n) {
      fail(p, "expected a " + std::to_string(n) + "x" + std::to_string(m) + " matrix");
    }
    Matrix out(n, m);
    for (int r = 0; r < n; ++r) {
      const auto pr = sub(p, std::to_string(r));
      const auto row = numbers(v[r], pr);
      if (static_cast<int>(row.size()) != m) fail(pr, "row has the wrong length");
      for (int c = 0; c < m; ++c) out(r, c) = row[c];
    }
    return out;
  }

 private:
  std::string_view text_;
  std::string source_;
};

struct MatrixSequence {
  std::vector<Matrix> values;
  Matrix tail;
  const Matrix& operator()(Regime i) const {
    return i >= 1 && static_cast<std::size_t>(i) <= values.size() ? values[i - 1] : tail;
  }
};

struct ModelBuild {
  std::optional<Sequence> b51;  // example51 drift coefficients, for affine c
};

ModelBuild build_model(const Reader& rd, const json& j, const Path& p, Scenario& sc) {
  ModelBuild mb;
  const std::string family = rd.string(j, p, "family");
  ModelSpec& m = sc.model;
  m.family = family;
  m.zero_fixed = true;

  if (family == "example51") {
    rd.allow(j, p, {"family", "gamma", "b", "sigma"});
    const double gamma = rd.number(j, p, "gamma");
    if (!(gamma > 0.0 && gamma < 1.0)) rd.fail(Reader::sub(p, "gamma"), "must lie in (0, 1)");
    const Sequence b = rd.sequence(rd.need(j, p, "b"), Reader::sub(p, "b"));
    const Sequence sigma = rd.sequence(rd.need(j, p, "sigma"), Reader::sub(p, "sigma"));
    m.dim = m.noise_dim = 1;
    m.drift = [b, gamma](const Vector& x, Regime i, Vector& out) {
      const double a = std::abs(x[0]);
      out.resize(1);
      out[0] = b(i) * x[0] * std::max(std::pow(a, gamma), 1.0);
    };
    m.diffusion = [sigma](const Vector& x, Regime i, Matrix& out) {
      const double s = std::sin(x[0]);
      out.resize(1, 1);
      out(0, 0) = sigma(i) * s * s;
    };
    m.linear = LinearPart{
        [b](Regime i) { return Matrix::Constant(1, 1, b(i)); },
        [](Regime) { return std::vector<Matrix>{Matrix::Zero(1, 1)}; }};
    mb.b51 = b;
  } else if (family == "example52") {
    rd.allow(j, p, {"family", "a", "b", "c"});
    const Sequence a = rd.sequence(rd.need(j, p, "a"), Reader::sub(p, "a"));
    const Sequence bb = rd.sequence(rd.need(j, p, "b"), Reader::sub(p, "b"));
    const Sequence c = rd.sequence(rd.need(j, p, "c"), Reader::sub(p, "c"));
    m.dim = 2;
    m.noise_dim = 1;
    auto A = [a, bb, c](Regime i) {
      Matrix M(2, 2);
      M << a(i), bb(i), 0.0, c(i);
      return M;
    };
    m.drift = [a, bb, c](const Vector& x, Regime i, Vector& out) {
      out.resize(2);
      out[0] = a(i) * x[0] + bb(i) * x[1];
      out[1] = c(i) * x[1];
    };
    m.diffusion = [](const Vector&, Regime, Matrix& out) { out.setZero(2, 1); };
    m.linear = LinearPart{A, [](Regime) { return std::vector<Matrix>{Matrix::Zero(2, 2)}; }};
  } else if (family == "linear") {
    rd.allow(j, p, {"family", "dim", "noise_dim", "A", "S"});
    const int n = static_cast<int>(rd.unsigned_int(j, p, "dim", 1));
    const int d = static_cast<int>(rd.unsigned_int(j, p, "noise_dim", 1));
    if (n < 1 || d < 1) rd.fail(p, "dim and noise_dim must be positive");
    auto read_mseq = [&](const json& v, const Path& q, auto&& read_one) {
      MatrixSequence s;
      if (v.is_object()) {
        rd.allow(v, q, {"values", "tail"});
        if (v.contains("values")) {
          const auto& vals = v.at("values");
          if (!vals.is_array()) rd.fail(Reader::sub(q, "values"), "expected an array");
          for (std::size_t k = 0; k < vals.size(); ++k) {
            s.values.push_back(read_one(vals[k], Reader::sub(Reader::sub(q, "values"), std::to_string(k))));
          }
        }
        if (v.contains("tail")) {
          s.tail = read_one(v.at("tail"), Reader::sub(q, "tail"));
        } else if (!s.values.empty()) {
          s.tail = s.values.back();
        } else {
          rd.fail(q, "needs values or a tail");
        }
      } else {
        s.tail = read_one(v, q);
      }
      return s;
    };
    const MatrixSequence A = read_mseq(rd.need(j, p, "A"), Reader::sub(p, "A"),
                                       [&](const json& v, const Path& q) { return rd.matrix(v, q, n, n); });
    // S(i) stacks sigma_1(i), ..., sigma_d(i) side by side: n x (n d).
    MatrixSequence S;
    if (j.contains("S")) {
      S = read_mseq(j.at("S"), Reader::sub(p, "S"), [&](const json& v, const Path& q) {
        if (!v.is_array() || static_cast<int>(v.size()) != d) {
          rd.fail(q, "expected a list of " + std::to_string(d) + " matrices");
        }
        Matrix out(n, n * d);
        for (int k = 0; k < d; ++k) out.middleCols(k * n, n) = rd.matrix(v[k], Reader::sub(q, std::to_string(k)), n, n);
        return out;
      });
    } else {
      S.tail = Matrix::Zero(n, n * d);
    }
    m.dim = n;
    m.noise_dim = d;
    m.drift = [A](const Vector& x, Regime i, Vector& out) { out.noalias() = A(i) * x; };
    m.diffusion = [S, n, d](const Vector& x, Regime i, Matrix& out) {
      out.resize(n, d);
      const Matrix& s = S(i);
      for (int k = 0; k < d; ++k) out.col(k).noalias() = s.middleCols(k * n, n) * x;
    };
    m.linear = LinearPart{[A](Regime i) { return A(i); },
                          [S, n, d](Regime i) {
                            std::vector<Matrix> out;
                            for (int k = 0; k < d; ++k) out.push_back(S(i).middleCols(k * n, n));
                            return out;
                          }};
  } else {
    rd.fail(Reader::sub(p, "family"), "unknown coefficient family '" + family +
                                          "' (expected example51, example52 or linear)");
  }
  return mb;
}

void build_kernel(const Reader& rd, const json& j, const Path& p, Scenario& sc) {
  const std::string family = rd.string(j, p, "family");
  if (family == "birth_death") {
    rd.allow(j, p, {"family", "up", "down", "up_modulation", "down_modulation", "n_states"});
    const Sequence up = rd.sequence(rd.need(j, p, "up"), Reader::sub(p, "up"));
    const Sequence down = rd.sequence(rd.need(j, p, "down"), Reader::sub(p, "down"));
    const double mu = rd.number(j, p, "up_modulation", 0.0);
    const double md = rd.number(j, p, "down_modulation", 0.0);
    if (up.inf() < 0.0 || down.inf() < 0.0) rd.fail(p, "rates must be non-negative");
    if (mu < -1.0 || md < -1.0) rd.fail(p, "modulations must be >= -1");
    const auto n = static_cast<Regime>(rd.unsigned_int(j, p, "n_states", 0));
    if (n == 1) rd.fail(Reader::sub(p, "n_states"), "needs at least two states");
    if (n > 0) sc.finite_states = n;
    const double bound = up.sup() * (1.0 + std::max(0.0, mu)) + down.sup() * (1.0 + std::max(0.0, md));
    sc.model.rate_kernel = RateKernel(
        [up, down, mu, md, n](const Vector& x, Regime i, RateRow& out) {
          const double s = std::sin(x.norm());
          const double s2 = s * s;
          out.clear();
          if (i >= 2) out.push_back({i - 1, down(i) * (1.0 + md * s2)});
          if (n == 0 || i < n) out.push_back({i + 1, up(i) * (1.0 + mu * s2)});
        },
        bound, {}, mu == 0.0 && md == 0.0);
  } else if (family == "example52_q") {
    rd.allow(j, p, {"family", "scale"});
    const double scale = rd.positive(j, p, "scale", 1.0);
    sc.model.rate_kernel = RateKernel(
        [scale](const Vector& x, Regime i, RateRow& out) {
          const double q = scale * (1.0 + std::sin(x.norm()));
          out.clear();
          if (i == 1) {
            out.push_back({2, q});
          } else {
            out.push_back({1, q});
            out.push_back({i + 1, q});
          }
        },
        4.0 * scale, [scale](double r) { return 2.0 * scale * (1.0 + std::sin(std::min(r, M_PI / 2))); });
  } else if (family == "two_state") {
    rd.allow(j, p, {"family", "q12", "q21"});
    const double a = rd.number(j, p, "q12"), b = rd.number(j, p, "q21");
    if (!(a > 0.0 && b > 0.0)) rd.fail(p, "q12 and q21 must be positive");
    sc.finite_states = 2;
    sc.model.rate_kernel = RateKernel(
        [a, b](const Vector&, Regime i, RateRow& out) {
          out.clear();
          if (i == 1) out.push_back({2, a});
          else if (i == 2) out.push_back({1, b});
          else throw DomainError("two_state kernel has regimes 1 and 2 only");
        },
        std::max(a, b), {}, true);
  } else if (family == "custom-table") {
    rd.allow(j, p, {"family", "rates", "modulation"});
    const auto& t = rd.need(j, p, "rates");
    const int n = t.is_array() ? static_cast<int>(t.size()) : 0;
    if (n < 2) rd.fail(Reader::sub(p, "rates"), "expected a square table with at least 2 states");
    const Matrix R = rd.matrix(t, Reader::sub(p, "rates"), n, n);
    for (int r = 0; r < n; ++r) {
      for (int c = 0; c < n; ++c) {
        if (r != c && R(r, c) < 0.0) rd.fail(Reader::sub(p, "rates"), "off-diagonal rates must be >= 0");
      }
    }
    const double mod = rd.number(j, p, "modulation", 0.0);
    if (mod < -1.0) rd.fail(Reader::sub(p, "modulation"), "must be >= -1");
    double bound = 0.0;
    for (int r = 0; r < n; ++r) bound = std::max(bound, R.row(r).sum() - R(r, r));
    sc.finite_states = n;
    sc.model.rate_kernel = RateKernel(
        [R, mod, n](const Vector& x, Regime i, RateRow& out) {
          if (i < 1 || i > n) throw DomainError("regime outside the custom table");
          const double f = 1.0 + mod * std::sin(x.norm());
          out.clear();
          for (int c = 0; c < n; ++c) {
            if (c + 1 != i && R(i - 1, c) > 0.0) out.push_back({c + 1, R(i - 1, c) * f});
          }
        },
        bound * (1.0 + std::max(0.0, mod)), {}, mod == 0.0);
  } else {
    rd.fail(Reader::sub(p, "family"), "unknown rate-kernel family '" + family +
                                          "' (expected birth_death, example52_q, two_state or custom-table)");
  }
}

void build_lyapunov(const Reader& rd, const json& j, const Path& p, Scenario& sc,
                    const ModelBuild& mb) {
  rd.allow(j, p, {"family", "p", "g", "c", "domain_radius", "direction"});
  const std::string family = rd.string(j, p, "family");
  if (family == "square") {
    sc.lyap = square_lyapunov();
  } else if (family == "power_p") {
    const auto pp = Reader::sub(p, "p");
    const double pw = rd.positive(j, p, "p");
    try {
      sc.lyap = power_lyapunov(pw);
    } catch (const Error& e) {
      rd.fail(pp, e.what());
    }
  } else {
    rd.fail(Reader::sub(p, "family"), "unknown Lyapunov family '" + family + "' (expected square or power_p)");
  }
  sc.lyap.domain_radius = rd.positive(j, p, "domain_radius");

  const auto gp = Reader::sub(p, "g");
  const auto& g = rd.need(j, p, "g");
  rd.allow(g, gp, {"family", "gamma", "h"});
  const std::string gf = rd.string(g, gp, "family");
  const double h = rd.positive(g, gp, "h", sc.lyap.domain_radius);
  if (gf == "identity") {
    sc.lyap.g = RateProfile::identity(h);
  } else if (gf == "power_1_plus_gamma") {
    const double gamma = rd.number(g, gp, "gamma");
    if (!(gamma > 0.0 && gamma < 1.0)) rd.fail(Reader::sub(gp, "gamma"), "must lie in (0, 1)");
    sc.lyap.g = RateProfile::power(gamma, h);
  } else {
    rd.fail(Reader::sub(gp, "family"), "unknown g family '" + gf + "' (expected identity or power_1_plus_gamma)");
  }

  const auto cp = Reader::sub(p, "c");
  const auto& c = rd.need(j, p, "c");
  if (c.is_object() && c.contains("affine_in_b")) {
    rd.allow(c, cp, {"affine_in_b"});
    const auto ap = Reader::sub(cp, "affine_in_b");
    const auto& a = c.at("affine_in_b");
    rd.allow(a, ap, {"scale", "shift"});
    if (!mb.b51) rd.fail(ap, "affine_in_b needs the example51 coefficient family");
    const double scale = rd.number(a, ap, "scale", 2.0), shift = rd.number(a, ap, "shift", 0.0);
    const Sequence b = *mb.b51;
    sc.lyap.c = [b, scale, shift](Regime i) { return scale * b(i) + shift; };
    double bound = std::abs(scale * b.tail + shift);
    for (double v : b.values) bound = std::max(bound, std::abs(scale * v + shift));
    sc.lyap.c_bound = bound;
  } else {
    const Sequence s = rd.sequence(c, cp);
    sc.lyap.c = [s](Regime i) { return s(i); };
    sc.lyap.c_bound = s.sup_abs();
  }

  const std::string dir = rd.string(j, p, "direction", "upper");
  if (dir == "upper") sc.direction = DriftDirection::upper;
  else if (dir == "lower") sc.direction = DriftDirection::lower;
  else rd.fail(Reader::sub(p, "direction"), "expected upper or lower");
  sc.has_lyapunov = true;
}

void read_sim(const Reader& rd, const json& j, const Path& p, Scenario& sc) {
  rd.allow(j, p, {"dt", "horizon", "seed", "scheme", "x0", "i0", "stop_radius", "stop_at_exit",
                  "record_stride"});
  SimConfig& s = sc.sim;
  s.dt = rd.positive(j, p, "dt", s.dt);
  s.horizon = rd.positive(j, p, "horizon", s.horizon);
  s.seed = rd.unsigned_int(j, p, "seed", s.seed);
  if (j.contains("scheme")) {
    try {
      s.scheme = parse_switch_scheme(rd.string(j, p, "scheme"));
    } catch (const Error& e) {
      rd.fail(Reader::sub(p, "scheme"), e.what());
    }
  }
  if (j.contains("x0")) {
    const auto& v = j.at("x0");
    const auto xp = Reader::sub(p, "x0");
    std::vector<double> x = v.is_number() ? std::vector<double>{rd.number(v, xp)} : rd.numbers(v, xp);
    if (static_cast<int>(x.size()) != sc.model.dim) {
      rd.fail(xp, "expected " + std::to_string(sc.model.dim) + " coordinates");
    }
    s.x0 = Eigen::Map<Vector>(x.data(), static_cast<Eigen::Index>(x.size()));
  }
  s.i0 = static_cast<Regime>(rd.unsigned_int(j, p, "i0", 1));
  if (s.i0 < 1) rd.fail(Reader::sub(p, "i0"), "regimes start at 1");
  if (j.contains("stop_radius")) s.stop_radius = rd.positive(j, p, "stop_radius");
  if (j.contains("stop_at_exit")) {
    if (!j.at("stop_at_exit").is_boolean()) rd.fail(Reader::sub(p, "stop_at_exit"), "expected a boolean");
    s.stop_at_exit = j.at("stop_at_exit").get<bool>();
  }
  s.record_stride = rd.unsigned_int(j, p, "record_stride", 1);
  if (s.record_stride < 1) rd.fail(Reader::sub(p, "record_stride"), "must be at least 1");
}

}  // namespace

double Sequence::sup_abs() const {
  double m = std::abs(tail);
  for (double v : values) m = std::max(m, std::abs(v));
  return m;
}

double Sequence::sup() const {
  double m = tail;
  for (double v : values) m = std::max(m, v);
  return m;
}

double Sequence::inf() const {
  double m = tail;
  for (double v : values) m = std::min(m, v);
  return m;
}

nlohmann::json Sequence::to_json() const { return {{"values", values}, {"tail", tail}}; }

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

Scenario parse_scenario(std::string_view text, const std::string& source) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    const std::size_t off = std::min<std::size_t>(e.byte > 0 ? e.byte - 1 : 0, text.size());
    const auto line = 1 + std::count(text.begin(), text.begin() + off, '\n');
    throw ScenarioError(source + ":" + std::to_string(line) + ": malformed JSON: " + e.what());
  }

  const Reader rd(text, source);
  const Path root;
  rd.allow(doc, root, {"name", "description", "dim", "noise_dim", "model", "kernel", "lyapunov",
                       "chain", "analysis", "sim", "mc", "coupling", "outputs"});

  Scenario sc;
  sc.source = source;
  sc.text = std::string(text);
  sc.hash = fnv1a64(text);
  sc.name = rd.string(doc, root, "name", "scenario");
  sc.description = rd.string(doc, root, "description", "");

  const ModelBuild mb = build_model(rd, rd.need(doc, root, "model"), {"model"}, sc);
  if (doc.contains("dim") && rd.unsigned_int(doc, root, "dim", 0) != static_cast<std::uint64_t>(sc.model.dim)) {
    rd.fail({"dim"}, "does not match the coefficient family (" + std::to_string(sc.model.dim) + ")");
  }
  if (doc.contains("noise_dim") &&
      rd.unsigned_int(doc, root, "noise_dim", 0) != static_cast<std::uint64_t>(sc.model.noise_dim)) {
    rd.fail({"noise_dim"}, "does not match the coefficient family (" + std::to_string(sc.model.noise_dim) + ")");
  }
  build_kernel(rd, rd.need(doc, root, "kernel"), {"kernel"}, sc);
  if (doc.contains("lyapunov")) build_lyapunov(rd, doc.at("lyapunov"), {"lyapunov"}, sc, mb);

  if (doc.contains("chain")) {
    const auto& c = doc.at("chain");
    rd.allow(c, {"chain"}, {"N", "mode"});
    sc.truncation = static_cast<Eigen::Index>(rd.unsigned_int(c, {"chain"}, "N", 30));
    if (sc.truncation < 2) rd.fail({"chain", "N"}, "needs at least 2 states");
    const std::string mode = rd.string(c, {"chain"}, "mode", "lump");
    if (mode == "lump") sc.truncation_mode = TruncationMode::lump;
    else if (mode == "drop") sc.truncation_mode = TruncationMode::drop;
    else rd.fail({"chain", "mode"}, "expected lump or drop");
  }
  if (sc.finite_states) sc.truncation = static_cast<Eigen::Index>(*sc.finite_states);

  if (doc.contains("analysis")) {
    const auto& a = doc.at("analysis");
    rd.allow(a, {"analysis"}, {"theorems", "probe_radii"});
    if (a.contains("theorems")) {
      const auto& t = a.at("theorems");
      if (!t.is_array()) rd.fail({"analysis", "theorems"}, "expected an array of names");
      for (std::size_t k = 0; k < t.size(); ++k) {
        const Path tp{"analysis", "theorems", std::to_string(k)};
        if (!t[k].is_string()) rd.fail(tp, "expected a theorem name");
        try {
          sc.theorems.push_back(parse_theorem(t[k].get<std::string>()));
        } catch (const Error& e) {
          rd.fail(tp, e.what());
        }
      }
    }
    if (a.contains("probe_radii")) sc.probe_radii = rd.numbers(a.at("probe_radii"), {"analysis", "probe_radii"});
  }
  if (sc.theorems.empty() && sc.has_lyapunov) {
    if (sc.direction == DriftDirection::lower) {
      sc.theorems = {Theorem::T3_5_ergodic, Theorem::T3_5_strong};
    } else if (sc.lyap.g.kind() == RateProfile::Kind::identity) {
      sc.theorems = {Theorem::T3_1, Theorem::T3_2, Theorem::T3_3};
    } else {
      sc.theorems = {Theorem::T3_2, Theorem::T3_3};
    }
  }

  sc.sim.x0 = Vector::Zero(sc.model.dim);
  sc.sim.x0[0] = 1e-2;
  if (doc.contains("sim")) read_sim(rd, doc.at("sim"), {"sim"}, sc);
  if (sc.finite_states && sc.sim.i0 > *sc.finite_states) rd.fail({"sim", "i0"}, "outside the finite chain");

  if (doc.contains("mc")) {
    const auto& m = doc.at("mc");
    rd.allow(m, {"mc"}, {"n_paths", "epsilon", "delta_sweep", "T0"});
    sc.n_paths = rd.unsigned_int(m, {"mc"}, "n_paths", sc.n_paths);
    if (sc.n_paths < 1) rd.fail({"mc", "n_paths"}, "must be at least 1");
    sc.epsilon = rd.number(m, {"mc"}, "epsilon", sc.epsilon);
    if (!(sc.epsilon > 0.0 && sc.epsilon < 1.0)) rd.fail({"mc", "epsilon"}, "must lie in (0, 1)");
    if (m.contains("delta_sweep")) {
      sc.delta_sweep = rd.numbers(m.at("delta_sweep"), {"mc", "delta_sweep"});
      for (double d : sc.delta_sweep) {
        if (!(d > 0.0)) rd.fail({"mc", "delta_sweep"}, "radii must be positive");
      }
    }
    if (m.contains("T0")) sc.T0 = rd.number(m, {"mc"}, "T0");
  }
  if (doc.contains("coupling")) {
    const auto& c = doc.at("coupling");
    rd.allow(c, {"coupling"}, {"h"});
    sc.coupling_radius = rd.positive(c, {"coupling"}, "h", sc.coupling_radius);
  }
  sc.outputs = rd.string(doc, root, "outputs", "out/" + sc.name);
  sc.document = std::move(doc);

  try {
    sc.sim.validate(sc.model.dim);
  } catch (const Error& e) {
    rd.fail({"sim"}, e.what());
  }
  return sc;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ScenarioError(path.string() + ": cannot open scenario file");
  std::ostringstream os;
  os << f.rdbuf();
  return parse_scenario(os.str(), path.string());
}

std::vector<std::string> preset_names() {
  std::vector<std::string> out;
  for (const auto& [name, text] : detail::bundled_presets()) out.emplace_back(name);
  return out;
}

std::optional<std::string_view> preset_text(std::string_view name) {
  for (const auto& [n, text] : detail::bundled_presets()) {
    if (n == name) return text;
  }
  return std::nullopt;
}

Scenario load_preset(const std::string& name) {
  const auto text = preset_text(name);
  if (!text) {
    std::string known;
    for (const auto& n : preset_names()) known += " " + n;
    throw ConfigError("unknown preset '" + name + "'; available:" + known);
  }
  return parse_scenario(*text, "preset:" + name);
}

}  // namespace switchdiff::tools
