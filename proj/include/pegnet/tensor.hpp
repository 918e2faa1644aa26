#ifndef PEGNET_TENSOR_HPP_
#define PEGNET_TENSOR_HPP_

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace pegnet {

/// Dense row-major matrix over an arbitrary scalar. Rows are nodes or edges,
/// columns are feature channels.
template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// The working tensor type of the model: rank-2, float64, row-major.
using Tensor = RowMatrix<double>;

using Index = Eigen::Index;

/// Node or edge index array.
using IndexArray = std::vector<std::int32_t>;

}  // namespace pegnet

#endif  // PEGNET_TENSOR_HPP_
