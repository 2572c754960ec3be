#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace staircase {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Invalid run parameters: confidence levels, window sizes, malformed configs.
/// Mapped to CLI exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data (non-finite values, schema
/// violations, unsupported designs). Mapped to CLI exit code 3.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerically infeasible computation: rank exceeds the observed dimensions,
/// or an ill-conditioned sub-block. Mapped to CLI exit code 4.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace staircase
