#include "subsde/linalg.hpp"

#include <unsupported/Eigen/MatrixFunctions>

namespace subsde {

Eigen::MatrixXd expm(const Eigen::MatrixXd& m) {
  return m.exp();
}

double min_eigenvalue(const Eigen::MatrixXd& sym) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym, Eigen::EigenvaluesOnly);
  return solver.eigenvalues().minCoeff();
}

}  // namespace subsde
