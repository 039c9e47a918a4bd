#pragma once

#include <complex>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "subsde/levy_subordinator.hpp"

namespace subsde {

/// One grid cell (t_end - dt, t_end] of the driving noise L = W_S.
///
/// The clock grows by `clock_drift` continuously over the cell and by
/// `clock_jump` at t_end. The matching Brownian increments are kept apart so
/// the cell can be bisected without disturbing the jump, but both are
/// applied at t_end (cadlag convention).
struct NoiseCell {
  double t_end = 0.0;
  double dt = 0.0;
  double clock_drift = 0.0;
  double clock_jump = 0.0;
  bool jump = false;
  Vec dl_cont;  ///< ~ N(0, clock_drift * I)
  Vec dl_jump;  ///< ~ N(0, clock_jump * I); zero when !jump

  Vec increment() const { return dl_cont + dl_jump; }
};

struct DrivingNoisePath {
  int d = 1;
  double start = 0.0;
  double drift_rate = 0.0;
  std::vector<NoiseCell> cells;

  double horizon() const { return cells.empty() ? start : cells.back().t_end; }
  Vec total() const;
  std::vector<double> grid() const;  ///< start followed by every t_end
};

/// Brownian motion run by the clock path: grid = uniform mesh of step at
/// most dt_max, every clock jump time and every entry of `required_times`
/// inside (0, horizon]. Grid times are offset by `start`.
DrivingNoisePath synthesize_noise(const SubordinatorPath& path, int d, double dt_max, Rng& rng,
                                  std::span<const double> required_times = {}, double start = 0.0);

/// Bisects every cell, splitting the continuous-clock increment with a
/// Brownian bridge; jumps stay at the right end. The refined path is the
/// same noise realization observed on twice as many points.
DrivingNoisePath refine(const DrivingNoisePath& noise, Rng& rng);

/// W_{S_T} sampled directly from its conditional law N(0, S_T * I).
Vec subordinated_terminal(const SubordinatorPath& path, int d, Rng& rng);

/// Worst-case CF error caused by replacing sub-eps clock jumps by drift:
/// horizon * q^2 / 2 * int_0^eps u^2 nu(du), where q bounds the clock
/// Laplace argument |A* z|^2 / 2 over the run.
double truncation_cf_bias(const SubordinatorSpec& spec, double eps, double horizon, double q);

struct DecompositionReport {
  std::vector<std::complex<double>> cf_full;   ///< route (i): full clock
  std::vector<std::complex<double>> cf_split;  ///< route (ii): jumps < 1 plus compound Poisson
  std::vector<double> discrepancy;
  double max_discrepancy = 0.0;
  double big_jump_rate = 0.0;
};

/// Simulates A W_{S_T} with the full clock and, independently, as
/// A W_{S'_T} + A H_T where S' keeps clock jumps below one and H is the
/// compound Poisson sum of big-jump displacements at rate nu([1, inf)).
/// Returns the empirical CF discrepancy at each probe frequency.
DecompositionReport verify_decomposition(const SubordinatorSpec& spec, const Mat& a, double horizon,
                                         const std::vector<Vec>& z_grid, std::size_t n_paths,
                                         std::uint64_t seed, double eps = kDefaultCut, unsigned threads = 1);

/// CSV rows (time, dL_1..dL_d, jump_flag).
void write_noise_csv(std::ostream& os, const DrivingNoisePath& noise);

}  // namespace subsde
