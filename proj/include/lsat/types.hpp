#pragma once

#include <Eigen/Dense>

namespace lsat {

// Dense row-major storage; all parameters, gradients and optimizer state
// use 64-bit floats.
template <typename Scalar>
using MatrixT = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using VectorT = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = MatrixT<double>;
using Vector = VectorT<double>;
using Index = Eigen::Index;

}  // namespace lsat
