#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

namespace mpm {

// Sequences are stored frames x features, row-major, so that one frame is a
// contiguous row.
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

using MatrixXf = Matrix<float>;
using MatrixXd = Matrix<double>;

using Tokens = std::vector<int>;
using Flags = std::vector<std::uint8_t>;

/// Half-open frame range [start, end).
struct FrameSpan {
  int start = 0;
  int end = 0;

  int length() const { return end - start; }
  friend bool operator==(const FrameSpan&, const FrameSpan&) = default;
};

}  // namespace mpm
