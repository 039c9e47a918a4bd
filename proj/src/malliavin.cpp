#include "subsde/malliavin.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "subsde/parallel.hpp"

namespace subsde {

MalliavinCovariance covariance(const SdeModel& model, const TrajectoryBundle& bundle,
                               const SubordinatorPath& path, double t) {
  const std::size_t last = bundle.index_of(t);
  const int d = model.d;
  const Mat aat = model.a * model.a.transpose();
  auto weight = [&](const Mat& k) { return Mat(k * aat * k.transpose()); };

  Mat drift_part = Mat::Zero(d, d);
  for (std::size_t i = 1; i <= last; ++i) {
    const double h = bundle.times[i] - bundle.times[i - 1];
    if (h <= 0.0) continue;
    const Mat& k0 = bundle.k[i - 1];
    const Mat& k1 = bundle.k[i];
    const Mat dk0 = -k0 * model.jacobian(bundle.x[i - 1]);
    const Mat dk1 = -k1 * model.jacobian(bundle.x_minus[i]);
    const Mat kmid = 0.5 * (k0 + k1) + (h / 8.0) * (dk0 - dk1);
    drift_part += (h / 6.0) * (weight(k0) + 4.0 * weight(kmid) + weight(k1));
  }
  Mat reduced = path.drift_rate * drift_part;
  for (const auto& jump : bundle.jump_log) {
    if (jump.index > last) break;
    reduced += jump.clock_jump * weight(bundle.k[jump.index]);
  }
  MalliavinCovariance out;
  out.t = bundle.times[last];
  out.reduced = reduced;
  const Mat& j = bundle.j[last];
  out.sigma = j * reduced * j.transpose();
  return out;
}

double directional_energy(const MalliavinCovariance& cov, const Eigen::RowVectorXd& a) {
  if (a.size() != cov.reduced.rows()) throw std::invalid_argument("direction has wrong dimension");
  if (std::abs(a.norm() - 1.0) > 1e-12) throw std::invalid_argument("direction must be a unit vector");
  return (a * cov.reduced * a.transpose())(0, 0);
}

double directional_energy(const SdeModel& model, const TrajectoryBundle& bundle,
                          const SubordinatorPath& path, const Eigen::RowVectorXd& a, double t) {
  return directional_energy(covariance(model, bundle, path, t), a);
}

WilsonInterval wilson_interval(std::size_t successes, std::size_t n, double z) {
  if (successes > n) throw std::invalid_argument("more successes than trials");
  if (n == 0) return {0.0, 1.0};
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(successes) / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double center = (p + z2 / (2.0 * nn)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / denom;
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

SmallBallProfile small_ball_profile(const SdeModel& model, const SubordinatorSpec& spec, const Vec& x0, double t,
                                    const std::vector<Eigen::RowVectorXd>& a_grid,
                                    const std::vector<double>& eps_grid, std::size_t n_paths,
                                    std::uint64_t seed, const SmallBallOptions& options) {
  if (n_paths < 10000) throw std::invalid_argument("small-ball profile needs at least 10^4 paths");
  if (!(t > 0.0)) throw std::invalid_argument("time must be positive");
  for (const auto& a : a_grid) {
    if (a.size() != model.d || std::abs(a.norm() - 1.0) > 1e-12) {
      throw std::invalid_argument("directions must be unit vectors of the model dimension");
    }
  }
  const double dt_max = options.dt_max > 0.0 ? options.dt_max : t / 256.0;
  const std::size_t na = a_grid.size();
  std::vector<double> energies(n_paths * na);
  parallel_for(n_paths, options.threads, [&](std::size_t i) {
    Rng rng = make_stream(seed, i);
    const SubordinatorPath clock = sample_path(spec, t, options.cut, rng);
    const DrivingNoisePath noise = synthesize_noise(clock, model.d, dt_max, rng);
    const TrajectoryBundle bundle = integrate(model, noise, x0);
    const MalliavinCovariance cov = covariance(model, bundle, clock, t);
    for (std::size_t k = 0; k < na; ++k) energies[i * na + k] = directional_energy(cov, a_grid[k]);
  });

  SmallBallProfile profile;
  for (double e : energies) profile.max_energy = std::max(profile.max_energy, e);
  for (std::size_t k = 0; k < na; ++k) {
    std::vector<double> lx;
    std::vector<double> ly;
    for (double eps : eps_grid) {
      std::size_t hits = 0;
      for (std::size_t i = 0; i < n_paths; ++i) hits += energies[i * na + k] <= eps ? 1 : 0;
      const auto ci = wilson_interval(hits, n_paths, options.z_quantile);
      const double p = static_cast<double>(hits) / static_cast<double>(n_paths);
      profile.rows.push_back({k, eps, p, ci.lo, ci.hi});
      if (p > 0.0 && eps > 0.0) {
        lx.push_back(std::log(eps));
        ly.push_back(std::log(p));
      }
    }
    double slope = std::numeric_limits<double>::quiet_NaN();
    if (lx.size() >= 2) {
      const double n = static_cast<double>(lx.size());
      double mx = 0.0, my = 0.0;
      for (std::size_t i = 0; i < lx.size(); ++i) {
        mx += lx[i];
        my += ly[i];
      }
      mx /= n;
      my /= n;
      double sxx = 0.0, sxy = 0.0;
      for (std::size_t i = 0; i < lx.size(); ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
      }
      if (sxx > 0.0) slope = sxy / sxx;
    }
    profile.slopes.push_back(slope);
  }
  return profile;
}

void write_profile_csv(std::ostream& os, const SmallBallProfile& profile) {
  os << "a_index,eps,p_hat,ci_lo,ci_hi\n" << std::setprecision(17);
  for (const auto& r : profile.rows) {
    os << r.a_index << ',' << r.eps << ',' << r.p_hat << ',' << r.ci_lo << ',' << r.ci_hi << '\n';
  }
}

}  // namespace subsde
