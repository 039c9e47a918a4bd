#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "subsde/sde_flow.hpp"

namespace subsde {

/// Sigma_t = J_t C_t J_t^T with C_t = int_0^t K_s A A^T K_s^T dS_s.
struct MalliavinCovariance {
  Eigen::MatrixXd sigma;
  Eigen::MatrixXd reduced;
  double t = 0.0;
};

/// Assembles the covariance at grid time t of the bundle. Clock jumps come
/// from the bundle's jump log; the drift part r_eps * int K A A^T K^T ds is
/// integrated cell by cell with Simpson's rule on a cubic Hermite
/// interpolant of K (K and dK/dt = -K grad b known at both cell ends).
MalliavinCovariance covariance(const SdeModel& model, const TrajectoryBundle& bundle,
                               const SubordinatorPath& path, double t);

/// int_0^t |a K_s A|^2 dS_s = a C_t a^T for a unit row vector a.
double directional_energy(const SdeModel& model, const TrajectoryBundle& bundle,
                          const SubordinatorPath& path, const Eigen::RowVectorXd& a, double t);
double directional_energy(const MalliavinCovariance& cov, const Eigen::RowVectorXd& a);

struct WilsonInterval {
  double lo = 0.0;
  double hi = 1.0;
};

/// Wilson score interval for `successes` out of `n` at normal quantile z.
WilsonInterval wilson_interval(std::size_t successes, std::size_t n, double z);

struct SmallBallRow {
  std::size_t a_index = 0;
  double eps = 0.0;
  double p_hat = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 1.0;
};

struct SmallBallProfile {
  std::vector<SmallBallRow> rows;
  /// Least-squares slope of log p_hat against log eps per direction, over
  /// the levels with p_hat > 0 (NaN with fewer than two such levels).
  std::vector<double> slopes;
  double max_energy = 0.0;
};

struct SmallBallOptions {
  double cut = kDefaultCut;
  double dt_max = 0.0;       ///< 0 selects t / 256
  double z_quantile = 2.5758293035489004;  ///< two-sided 99%
  unsigned threads = 1;
};

/// Empirical P{ int_0^t |a K_s A|^2 dS_s <= eps } per (a, eps) over
/// n_paths >= 10^4 seeded paths.
SmallBallProfile small_ball_profile(const SdeModel& model, const SubordinatorSpec& spec, const Vec& x0, double t,
                                    const std::vector<Eigen::RowVectorXd>& a_grid,
                                    const std::vector<double>& eps_grid, std::size_t n_paths,
                                    std::uint64_t seed, const SmallBallOptions& options = {});

/// CSV rows (a_index, eps, p_hat, ci_lo, ci_hi).
void write_profile_csv(std::ostream& os, const SmallBallProfile& profile);

}  // namespace subsde
