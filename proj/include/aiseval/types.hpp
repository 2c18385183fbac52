#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace aiseval {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Raised when a caller violates an operation's preconditions
/// (dimension mismatch, out-of-range parameter, non-binary Bernoulli data).
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed model, config or dataset content.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Every importance weight was -inf, so no estimate exists.
class EstimationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace aiseval
