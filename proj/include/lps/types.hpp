#pragma once

#include <Eigen/Dense>

namespace lps {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

}  // namespace lps
