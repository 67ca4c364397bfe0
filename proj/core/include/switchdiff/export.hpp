#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>

#include <nlohmann/json.hpp>

#include "switchdiff/ensemble.hpp"
#include "switchdiff/markov_chain.hpp"
#include "switchdiff/rates.hpp"
#include "switchdiff/simulator.hpp"
#include "switchdiff/stability.hpp"

namespace switchdiff {

/// Shortest decimal that round-trips to the same double.
std::string format_double(double v);

/// Columns t, x1..xn, regime; one row per recorded time.
void write_trajectory_csv(std::ostream& os, const Trajectory& path);
void write_matrix_csv(std::ostream& os, const Matrix& m);
/// Columns regime, nu; a lumped tail row is labeled "N+".
void write_measure_csv(std::ostream& os, const InvariantMeasure& nu);
/// Columns lambda, quantile, n_surviving.
void write_quantile_curve_csv(std::ostream& os, const PathwiseRateEstimate& est);

nlohmann::json diagnostics_json(const TruncatedChain& chain, const InvariantMeasure& nu,
                                const ErgodicityDiagnostic& diag);
nlohmann::json to_json(const FunctionalEstimate& est);
nlohmann::json to_json(const EnsembleSummary& summary);
nlohmann::json to_json(const CriterionReport& report);
nlohmann::json to_json(const LinearizationData& data);
nlohmann::json to_json(const EigenCriterion& crit);
nlohmann::json to_json(const PathwiseRateEstimate& est);
nlohmann::json to_json(const MgScan& scan);
nlohmann::json to_json(const KernelContinuityScan& scan);
nlohmann::json to_json(const DriftConditionReport& report);

/// Writes text to a file, creating parent directories. Throws Error on failure.
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace switchdiff
