#include "subsde/sample_paths.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>

#include "subsde/parallel.hpp"

namespace subsde {

namespace {

Vec gaussian(int d, double variance, Rng& rng) {
  Vec v = Vec::Zero(d);
  if (variance <= 0.0) return v;
  std::normal_distribution<double> normal(0.0, 1.0);
  const double scale = std::sqrt(variance);
  for (int i = 0; i < d; ++i) v[i] = scale * normal(rng);
  return v;
}

}  // namespace

Vec DrivingNoisePath::total() const {
  Vec sum = Vec::Zero(d);
  for (const auto& cell : cells) sum += cell.dl_cont + cell.dl_jump;
  return sum;
}

std::vector<double> DrivingNoisePath::grid() const {
  std::vector<double> g;
  g.reserve(cells.size() + 1);
  g.push_back(start);
  for (const auto& cell : cells) g.push_back(cell.t_end);
  return g;
}

DrivingNoisePath synthesize_noise(const SubordinatorPath& path, int d, double dt_max, Rng& rng,
                                  std::span<const double> required_times, double start) {
  if (d < 1 || d > kMaxDim) throw std::invalid_argument("noise dimension out of range");
  if (!(dt_max > 0.0)) throw std::invalid_argument("dt_max must be positive");
  const double horizon = path.horizon;

  // Local times of every grid point in (0, horizon]; jump times are flagged.
  struct Node {
    double t;
    double jump;
    bool is_jump;
  };
  std::vector<Node> nodes;
  const auto mesh = horizon > 0.0 ? static_cast<std::size_t>(std::ceil(horizon / dt_max - 1e-12)) : 0;
  nodes.reserve(mesh + path.jumps.size() + required_times.size());
  for (std::size_t k = 1; k <= mesh; ++k) {
    nodes.push_back({k == mesh ? horizon : horizon * static_cast<double>(k) / static_cast<double>(mesh), 0.0, false});
  }
  for (double t : required_times) {
    const double local = t - start;
    if (local > 0.0 && local <= horizon) nodes.push_back({local, 0.0, false});
  }
  for (const auto& jump : path.jumps) nodes.push_back({jump.time, jump.size, true});
  std::sort(nodes.begin(), nodes.end(), [](const Node& a, const Node& b) { return a.t < b.t; });

  DrivingNoisePath noise;
  noise.d = d;
  noise.start = start;
  noise.drift_rate = path.drift_rate;
  noise.cells.reserve(nodes.size());
  double prev = 0.0;
  for (const auto& node : nodes) {
    if (!noise.cells.empty() && node.t == prev) {
      // coincident grid point: fold a jump into the existing cell
      auto& cell = noise.cells.back();
      if (node.is_jump) {
        cell.jump = true;
        cell.clock_jump += node.jump;
      }
      continue;
    }
    NoiseCell cell;
    cell.t_end = start + node.t;
    cell.dt = node.t - prev;
    cell.clock_drift = path.drift_rate * cell.dt;
    cell.jump = node.is_jump;
    cell.clock_jump = node.is_jump ? node.jump : 0.0;
    noise.cells.push_back(std::move(cell));
    prev = node.t;
  }
  for (auto& cell : noise.cells) {
    cell.dl_cont = gaussian(d, cell.clock_drift, rng);
    cell.dl_jump = gaussian(d, cell.clock_jump, rng);
  }
  return noise;
}

DrivingNoisePath refine(const DrivingNoisePath& noise, Rng& rng) {
  DrivingNoisePath fine;
  fine.d = noise.d;
  fine.start = noise.start;
  fine.drift_rate = noise.drift_rate;
  fine.cells.reserve(2 * noise.cells.size());
  std::normal_distribution<double> normal(0.0, 1.0);
  for (const auto& cell : noise.cells) {
    NoiseCell left;
    NoiseCell right = cell;
    left.dt = 0.5 * cell.dt;
    right.dt = cell.dt - left.dt;
    left.t_end = cell.t_end - right.dt;
    left.clock_drift = cell.clock_drift * (left.dt / cell.dt);
    right.clock_drift = cell.clock_drift - left.clock_drift;
    // Bridge: given the sum x over variance v split as v1 + v2,
    // the first part is N(x v1 / v, v1 v2 / v).
    left.dl_cont = Vec::Zero(noise.d);
    left.dl_jump = Vec::Zero(noise.d);
    if (cell.clock_drift > 0.0) {
      const double w = left.clock_drift / cell.clock_drift;
      const double sd = std::sqrt(left.clock_drift * right.clock_drift / cell.clock_drift);
      for (int i = 0; i < noise.d; ++i) left.dl_cont[i] = w * cell.dl_cont[i] + sd * normal(rng);
    }
    right.dl_cont = cell.dl_cont - left.dl_cont;
    fine.cells.push_back(std::move(left));
    fine.cells.push_back(std::move(right));
  }
  return fine;
}

Vec subordinated_terminal(const SubordinatorPath& path, int d, Rng& rng) {
  return gaussian(d, path.terminal(), rng);
}

double truncation_cf_bias(const SubordinatorSpec& spec, double eps, double horizon, double q) {
  return horizon * 0.5 * q * q * spec.truncated_second_moment(eps);
}

DecompositionReport verify_decomposition(const SubordinatorSpec& spec, const Mat& a, double horizon,
                                         const std::vector<Vec>& z_grid, std::size_t n_paths,
                                         std::uint64_t seed, double eps, unsigned threads) {
  if (n_paths < 1000) throw std::invalid_argument("decomposition check needs at least 1000 paths");
  const int d = static_cast<int>(a.rows());
  if (a.cols() != d) throw std::invalid_argument("noise matrix must be square");
  for (const auto& z : z_grid) {
    if (z.size() != d) throw std::invalid_argument("probe frequency has wrong dimension");
  }
  const double rate = big_jump_rate(spec);
  const JumpSizeSampler big_sizes(spec, 1.0, std::numeric_limits<double>::infinity());

  // Two independent sample sets; route (ii) uses the odd streams.
  std::vector<Vec> full(n_paths);
  std::vector<Vec> split(n_paths);
  parallel_for(n_paths, threads, [&](std::size_t i) {
    Rng rng_full = make_stream(seed, 2 * i);
    const SubordinatorPath clock = sample_path(spec, horizon, eps, rng_full);
    full[i] = a * subordinated_terminal(clock, d, rng_full);

    Rng rng_split = make_stream(seed, 2 * i + 1);
    const SubordinatorPath small = sample_small_jump_path(spec, horizon, eps, rng_split);
    Vec x = subordinated_terminal(small, d, rng_split);
    std::poisson_distribution<long> count(rate * horizon);
    const long n_big = horizon > 0.0 ? count(rng_split) : 0;
    std::normal_distribution<double> normal(0.0, 1.0);
    for (long j = 0; j < n_big; ++j) {
      const double s = std::sqrt(big_sizes(rng_split));
      for (int k = 0; k < d; ++k) x[k] += s * normal(rng_split);
    }
    split[i] = a * x;
  });

  DecompositionReport report;
  report.big_jump_rate = rate;
  auto ecf = [&](const std::vector<Vec>& xs, const Vec& z) {
    double re = 0.0;
    double im = 0.0;
    for (const auto& x : xs) {
      const double phase = z.dot(x);
      re += std::cos(phase);
      im += std::sin(phase);
    }
    const double n = static_cast<double>(xs.size());
    return std::complex<double>(re / n, im / n);
  };
  for (const auto& z : z_grid) {
    const auto c1 = ecf(full, z);
    const auto c2 = ecf(split, z);
    report.cf_full.push_back(c1);
    report.cf_split.push_back(c2);
    report.discrepancy.push_back(std::abs(c1 - c2));
    report.max_discrepancy = std::max(report.max_discrepancy, report.discrepancy.back());
  }
  return report;
}

void write_noise_csv(std::ostream& os, const DrivingNoisePath& noise) {
  os << "time";
  for (int i = 0; i < noise.d; ++i) os << ",dL_" << (i + 1);
  os << ",jump_flag\n";
  os << std::setprecision(17);
  for (const auto& cell : noise.cells) {
    os << cell.t_end;
    const Vec inc = cell.increment();
    for (int i = 0; i < noise.d; ++i) os << ',' << inc[i];
    os << ',' << (cell.jump ? 1 : 0) << '\n';
  }
}

}  // namespace subsde
