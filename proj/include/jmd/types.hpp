#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace jmd {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

}  // namespace jmd
