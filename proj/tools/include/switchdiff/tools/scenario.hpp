#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "switchdiff/errors.hpp"
#include "switchdiff/markov_chain.hpp"
#include "switchdiff/model.hpp"
#include "switchdiff/simulator.hpp"
#include "switchdiff/stability.hpp"

namespace switchdiff::tools {

/// Parse or validation failure, prefixed with "source:line: ".
class ScenarioError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

/// Regime-indexed sequence: explicit leading values, then a constant tail.
struct Sequence {
  std::vector<double> values;
  double tail = 0.0;

  static Sequence constant(double v) { return {{}, v}; }
  double operator()(Regime i) const {
    return i >= 1 && static_cast<std::size_t>(i) <= values.size() ? values[i - 1] : tail;
  }
  double sup_abs() const;
  double sup() const;
  double inf() const;
  nlohmann::json to_json() const;
};

struct Scenario {
  std::string name;
  std::string description;
  std::string source;       // file path or preset label
  std::string text;         // raw bytes the scenario was parsed from
  std::uint64_t hash = 0;   // FNV-1a of text
  nlohmann::json document;  // parsed form, echoed into reports

  ModelSpec model;
  /// Number of regimes for finite chains; unset for countable ones.
  std::optional<Regime> finite_states;

  bool has_lyapunov = false;
  LyapunovSpec lyap;
  DriftDirection direction = DriftDirection::upper;

  Eigen::Index truncation = 30;
  TruncationMode truncation_mode = TruncationMode::lump;
  std::vector<Theorem> theorems;
  std::vector<double> probe_radii{1e-1, 1e-2, 1e-3};

  SimConfig sim;
  std::size_t n_paths = 1000;
  double epsilon = 0.05;
  std::vector<double> delta_sweep;
  std::optional<double> T0;
  double coupling_radius = 0.05;
  std::string outputs = "out";
};

std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t v);

/// Parses scenario text. `source` labels error messages.
Scenario parse_scenario(std::string_view text, const std::string& source);
Scenario load_scenario(const std::filesystem::path& path);

/// Names of the bundled presets and their text.
std::vector<std::string> preset_names();
std::optional<std::string_view> preset_text(std::string_view name);
Scenario load_preset(const std::string& name);

}  // namespace switchdiff::tools
