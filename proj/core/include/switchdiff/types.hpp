#pragma once

#include <cstdint>

#include <Eigen/Dense>

namespace switchdiff {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

//! Regime labels are 1-based and unbounded.
using Regime = std::int64_t;

}  // namespace switchdiff
