#pragma once

#include <functional>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "subsde/sample_paths.hpp"

namespace subsde {

/// dX = b(X) dt + A dL with constant noise matrix A.
struct SdeModel {
  std::string name;
  int d = 1;
  std::function<Vec(const Vec&)> drift;
  /// grad b, entry (i, j) = d_j b^i.
  std::function<Mat(const Vec&)> jacobian;
  /// Optional: (x, v) -> sum_k v_k d_k (grad b)(x). Used by the bracket
  /// hierarchy in place of finite differences when present.
  std::function<Mat(const Vec&, const Vec&)> jacobian_derivative;
  Mat a;
  double lipschitz_bound = std::numeric_limits<double>::infinity();
};

SdeModel zero_drift_model(const Mat& a);
SdeModel linear_model(const Mat& b, const Mat& a);
/// d = 2, b(x) = [[0,1],[0,0]] x, A = diag(0, 1).
SdeModel kinetic_linear_model();
/// d = 2, b(x, v) = (v, sin x), A = diag(0, 1).
SdeModel pendulum_model();

/// H(x, y) on R^d x R^d, given through its gradient (grad_x H, grad_y H)
/// stacked into one 2d vector. The Hessian is optional; without it the
/// drift Jacobian comes from central differences of the gradient.
struct Hamiltonian {
  int d = 1;
  std::function<Vec(const Vec& x, const Vec& y)> gradient;
  std::function<Mat(const Vec& x, const Vec& y)> hessian;
};

/// Drift (x, y) -> (grad_y H, -grad_x H) and A = blockdiag(0, a_v).
SdeModel hamiltonian_model(const Hamiltonian& h, const Mat& a_v);

/// Throws std::invalid_argument if the Jacobian evaluator disagrees with
/// central differences of the drift (step 1e-4, relative error 1e-5) at
/// `probes` random points.
void validate_model(const SdeModel& model, Rng& rng, int probes = 8);

struct JumpRecord {
  std::size_t index = 0;  ///< grid index of the jump time
  double time = 0.0;
  Vec dl;                 ///< full noise increment applied at this time
  double clock_jump = 0.0;
  Vec displacement;       ///< A * dl, added to the pre-jump state
};

/// Aligned samples of X (cadlag), its Jacobian J and inverse Jacobian K on
/// the driving noise grid. x_minus[k] is the state just before the
/// additive update at times[k]; x[k] = x_minus[k] + A * dL_k exactly.
struct TrajectoryBundle {
  std::vector<double> times;
  std::vector<Vec> x;
  std::vector<Vec> x_minus;
  std::vector<Mat> j;
  std::vector<Mat> k;
  std::vector<double> trace_integral;  ///< int_0^t tr grad b(X_s) ds
  std::vector<JumpRecord> jump_log;
  std::vector<std::string> warnings;

  std::size_t index_of(double t) const;  ///< grid index with times[i] == t (1e-12 slack)
};

/// Integrates X, J and K along one driving path. Between grid times the
/// system is an ODE advanced by one classical RK4 step per cell; at the
/// end of each cell X receives A * dL while J and K stay continuous.
TrajectoryBundle integrate(const SdeModel& model, const DrivingNoisePath& noise, const Vec& x0);

/// State-only variant for ensembles. `on_cell` sees every post-update state.
Vec advance(const SdeModel& model, const DrivingNoisePath& noise, const Vec& x0,
            const std::function<void(const NoiseCell&, const Vec&)>& on_cell = {});

/// Matrix field V with its directional derivative (x, v) -> sum_k v_k d_k V(x).
struct MatrixField {
  std::function<Mat(const Vec&)> value;
  std::function<Mat(const Vec&, const Vec&)> directional;
};

/// max over grid times of
///   | K_t V(X_t) - V(x0) - int_0^t K (b.grad V - grad b V)(X_s) ds
///     - sum_{s <= t} K_s (V(X_s) - V(X_s-)) |
/// with the time integral by the trapezoid rule on each cell.
double ito_product_residual(const SdeModel& model, const TrajectoryBundle& bundle, const MatrixField& v);

/// max_t |J_t K_t - I| (Frobenius).
double inverse_flow_residual(const TrajectoryBundle& bundle);
/// max_t |log det J_t - int_0^t tr grad b(X_s) ds|.
double liouville_residual(const TrajectoryBundle& bundle);

/// CSV rows (t, X_1..X_d[, vec J, vec K]) with a header line.
void write_bundle_csv(std::ostream& os, const TrajectoryBundle& bundle, bool with_jacobians);

}  // namespace subsde
