#pragma once

#include <Eigen/Core>

namespace absa {

// Row-major so serialized tensors are flat row-major without copies.
template <class Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <class Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

}  // namespace absa
