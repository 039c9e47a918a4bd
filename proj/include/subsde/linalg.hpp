#pragma once

#include <Eigen/Dense>

namespace subsde {

/// Largest state dimension handled by the flow integrator. Vectors and
/// matrices below carry inline storage of this capacity so that the inner
/// integration loops never touch the heap.
inline constexpr int kMaxDim = 8;

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim, kMaxDim>;

/// Matrix exponential of a small dense matrix (scaling and squaring with a
/// Pade approximant, delegated to Eigen's MatrixFunctions module).
Eigen::MatrixXd expm(const Eigen::MatrixXd& m);

/// Smallest eigenvalue of a symmetric matrix.
double min_eigenvalue(const Eigen::MatrixXd& sym);

}  // namespace subsde
