#pragma once

#include <Eigen/Core>

namespace jpt {

// Rows are sequence positions / tokens throughout the library.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

}  // namespace jpt
