#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace necho {

using Scalar = double;
using Index = Eigen::Index;

// Row-major so that a row is one visit / one token and matches the
// little-endian checkpoint layout.
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;
using ColVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
using IndexMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using MatrixRef = Eigen::Ref<Matrix>;
using ConstMatrixRef = Eigen::Ref<const Matrix>;

struct Shape {
    Index rows = 0;
    Index cols = 0;

    Index size() const { return rows * cols; }
    bool operator==(const Shape&) const = default;
};

std::string to_string(const Shape& s);

/// Shape or contract violation inside the tensor engine.
class DimensionError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// NaN/Inf or an otherwise unusable numeric state.
class NumericError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Invalid configuration (bad sizes, negative weights, unknown switches).
class ConfigError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

}  // namespace necho
