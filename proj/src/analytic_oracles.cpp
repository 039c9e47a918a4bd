#include "subsde/analytic_oracles.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "subsde/linalg.hpp"

namespace subsde {

namespace {

constexpr double kPi = std::numbers::pi;

template <class F>
double adaptive(F&& f, double lo, double hi, double tol, unsigned depth, const char* what) {
  double error = 0.0;
  double l1 = 0.0;
  const double v = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, lo, hi, depth, tol, &error, &l1);
  if (!std::isfinite(v) || error > 1e3 * tol * std::max(l1, 1e-300) + 1e-300) {
    throw QuadratureError(std::string("quadrature tolerance not met: ") + what);
  }
  return v;
}

// Gauss-Legendre nodes and weights on [0, t].
void legendre_rule(double t, std::vector<double>& nodes, std::vector<double>& weights) {
  using rule = boost::math::quadrature::gauss<double, 20>;
  nodes.clear();
  weights.clear();
  const auto& x = rule::abscissa();
  const auto& w = rule::weights();
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (int sign : {-1, 1}) {
      if (x[i] == 0.0 && sign < 0) continue;
      nodes.push_back(0.5 * t * (1.0 + sign * x[i]));
      weights.push_back(0.5 * t * w[i]);
    }
  }
}

double radial_integral(double kappa, double m, int d, double alpha, double radius) {
  const double p = (m + d) / alpha;
  if (!std::isfinite(radius)) {
    if (kappa <= 0.0) return std::numeric_limits<double>::infinity();
    return std::tgamma(p) * std::pow(kappa, -p) / alpha;
  }
  if (kappa <= 0.0) return std::pow(radius, m + d) / (m + d);
  return boost::math::tgamma_lower(p, kappa * std::pow(radius, alpha)) * std::pow(kappa, -p) / alpha;
}

double radial_tail(double kappa, double m, int d, double alpha, double radius) {
  if (kappa <= 0.0) return std::numeric_limits<double>::infinity();
  const double p = (m + d) / alpha;
  return boost::math::tgamma(p, kappa * std::pow(radius, alpha)) * std::pow(kappa, -p) / alpha;
}

double sphere_area(int d) {
  switch (d) {
    case 1: return 2.0;
    case 2: return 2.0 * kPi;
    default: return 4.0 * kPi;
  }
}

// Integrates f(omega) over the unit sphere of R^d, d <= 3.
template <class F>
double sphere_integral(int d, F&& f) {
  Eigen::VectorXd w(d);
  if (d == 1) {
    w[0] = 1.0;
    double s = f(w);
    w[0] = -1.0;
    return s + f(w);
  }
  if (d == 2) {
    return adaptive(
        [&](double th) {
          Eigen::VectorXd u(2);
          u << std::cos(th), std::sin(th);
          return f(u);
        },
        0.0, 2.0 * kPi, 1e-9, 12, "angular integral");
  }
  return adaptive(
      [&](double th) {
        return std::sin(th) * adaptive(
                                  [&](double ph) {
                                    Eigen::VectorXd u(3);
                                    u << std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), std::cos(th);
                                    return f(u);
                                  },
                                  0.0, 2.0 * kPi, 1e-8, 8, "azimuthal integral");
      },
      0.0, kPi, 1e-8, 8, "polar integral");
}

}  // namespace

StableCalibration stable_calibration(const SubordinatorSpec& spec) {
  if (spec.kind() != SubordinatorKind::stable) {
    throw std::invalid_argument("stable calibration is unsupported for custom subordinators");
  }
  const double beta = spec.beta();
  return {2.0 * beta, spec.c() * std::tgamma(1.0 - beta) / (beta * std::pow(2.0, beta))};
}

OuSystem make_ou_system(const Eigen::MatrixXd& b, const Eigen::MatrixXd& a, const SubordinatorSpec& spec) {
  if (b.rows() != b.cols() || a.rows() != b.rows() || a.cols() != b.rows()) {
    throw std::invalid_argument("B and A must be square of equal size");
  }
  const auto cal = stable_calibration(spec);
  return {b, a, cal.alpha, cal.c_l};
}

namespace {

constexpr int kPanels = 32;
using PanelRule = boost::math::quadrature::gauss<double, 16>;
constexpr std::size_t kPerPanel = 16;

}  // namespace

OuExponent::OuExponent(const OuSystem& sys, double t) : sys_(sys), t_(t) {
  if (t < 0.0) throw std::invalid_argument("time must be nonnegative");
  const auto& x = PanelRule::abscissa();
  const auto& w = PanelRule::weights();
  const double width = t / kPanels;
  for (int p = 0; p < kPanels; ++p) {
    const double mid = (p + 0.5) * width;
    std::vector<std::pair<double, double>> panel;
    for (std::size_t i = 0; i < x.size(); ++i) {
      panel.emplace_back(mid - 0.5 * width * x[i], 0.5 * width * w[i]);
      panel.emplace_back(mid + 0.5 * width * x[i], 0.5 * width * w[i]);
    }
    std::sort(panel.begin(), panel.end());
    for (const auto& [node, weight] : panel) {
      nodes_.push_back(node);
      weights_.push_back(weight);
      cached_.push_back(expm(node * sys.b) * sys.a);
    }
  }
}

double OuExponent::direct(const Eigen::RowVectorXd& zt, double s) const {
  return std::pow((zt * expm(s * sys_.b) * sys_.a).norm(), sys_.alpha);
}

double OuExponent::operator()(const Eigen::VectorXd& z) const {
  if (t_ == 0.0 || z.isZero(0.0)) return 0.0;
  const Eigen::RowVectorXd zt = z.transpose();
  if (sys_.b.isZero(0.0)) return t_ * direct(zt, 0.0);
  static thread_local boost::math::quadrature::tanh_sinh<double> tanh_sinh;
  const double width = t_ / kPanels;
  double total = 0.0;
  std::vector<double> norms(kPerPanel);
  for (int p = 0; p < kPanels; ++p) {
    const std::size_t base = static_cast<std::size_t>(p) * kPerPanel;
    double hi = 0.0, lo = std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (std::size_t k = 0; k < kPerPanel; ++k) {
      norms[k] = (zt * cached_[base + k]).norm();
      hi = std::max(hi, norms[k]);
      if (norms[k] < lo) {
        lo = norms[k];
        arg = k;
      }
    }
    if (hi == 0.0) continue;
    if (lo >= 0.2 * hi) {
      for (std::size_t k = 0; k < kPerPanel; ++k) total += weights_[base + k] * std::pow(norms[k], sys_.alpha);
      continue;
    }
    const double a = p * width;
    const double b = (p + 1) * width;
    // Golden-section search for the minimizer of |v(s)|^2 around the smallest node.
    double l = arg == 0 ? a : nodes_[base + arg - 1];
    double r = arg + 1 == kPerPanel ? b : nodes_[base + arg + 1];
    auto sq = [&](double s) { return (zt * expm(s * sys_.b) * sys_.a).squaredNorm(); };
    constexpr double g = 0.6180339887498949;
    double c1 = r - g * (r - l), c2 = l + g * (r - l);
    double f1 = sq(c1), f2 = sq(c2);
    for (int it = 0; it < 80 && r - l > 1e-14 * width; ++it) {
      if (f1 < f2) {
        r = c2;
        c2 = c1;
        f2 = f1;
        c1 = r - g * (r - l);
        f1 = sq(c1);
      } else {
        l = c1;
        c1 = c2;
        f1 = f2;
        c2 = l + g * (r - l);
        f2 = sq(c2);
      }
    }
    const double split = 0.5 * (l + r);
    auto f = [&](double s) -> double { return direct(zt, s); };
    const double ends[3] = {a, split, b};
    for (int side = 0; side < 2; ++side) {
      const double u = ends[side];
      const double v = ends[side + 1];
      if (v - u <= 1e-12 * width) continue;
      double err = 0.0, l1 = 0.0;
      const double floor = 1e-12 * width * std::pow(hi, sys_.alpha);
      double piece = tanh_sinh.integrate(f, u, v, 1e-12, &err, &l1);
      if (!std::isfinite(piece) || err > 1e-8 * l1 + floor) {
        // Missed kink: bisecting Gauss-Kronrod copes with an interior corner.
        piece = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, u, v, 12, 1e-10, &err, &l1);
        if (!std::isfinite(piece) || err > 1e-8 * l1 + 10.0 * floor) {
          throw QuadratureError("quadrature tolerance not met: OU exponent");
        }
      }
      total += piece;
    }
  }
  return total;
}

double ou_exponent(const OuSystem& sys, double t, const Eigen::VectorXd& z) {
  if (t < 0.0) throw std::invalid_argument("time must be nonnegative");
  if (t == 0.0 || z.isZero(0.0)) return 0.0;
  return OuExponent(sys, t)(z);
}

std::complex<double> ou_char_function(const OuSystem& sys, double t, const Eigen::VectorXd& z) {
  return {std::exp(-sys.c_l * ou_exponent(sys, t, z)), 0.0};
}

DecayRate ou_decay_rate(const OuSystem& sys, double t) {
  const auto d = sys.b.rows();
  DecayRate out;
  std::vector<double> nodes;
  std::vector<double> weights;
  legendre_rule(t, nodes, weights);
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(d, d);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const Eigen::MatrixXd ea = expm(nodes[i] * sys.b) * sys.a;
    gram += weights[i] * ea * ea.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  const double lmax = eig.eigenvalues().maxCoeff();
  out.gramian_ratio = lmax > 0.0 ? eig.eigenvalues().minCoeff() / lmax : 0.0;

  const OuExponent exponent(sys, t);
  auto rate = [&](const Eigen::VectorXd& a) { return exponent(a); };
  std::vector<Eigen::VectorXd> probes;
  for (Eigen::Index k = 0; k < d; ++k) probes.push_back(eig.eigenvectors().col(k));
  if (d == 2) {
    for (int k = 0; k < 64; ++k) {
      Eigen::VectorXd u(2);
      u << std::cos(kPi * k / 64.0), std::sin(kPi * k / 64.0);
      probes.push_back(u);
    }
  } else if (d >= 3) {
    std::mt19937_64 rng(0x5eed);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int k = 0; k < 200; ++k) {
      Eigen::VectorXd u(d);
      for (Eigen::Index i = 0; i < d; ++i) u[i] = normal(rng);
      probes.push_back(u.normalized());
    }
  }
  double best = std::numeric_limits<double>::infinity();
  double worst = 0.0;
  Eigen::VectorXd arg = probes.front();
  for (const auto& u : probes) {
    const double r = rate(u);
    worst = std::max(worst, r);
    if (r < best) {
      best = r;
      arg = u;
    }
  }
  // Coordinate pattern search on the sphere.
  for (double step = 0.1; step > 1e-4 && d > 1; step *= 0.5) {
    bool improved = true;
    while (improved) {
      improved = false;
      for (Eigen::Index i = 0; i < d; ++i) {
        for (double sign : {-1.0, 1.0}) {
          Eigen::VectorXd trial = arg;
          trial[i] += sign * step;
          trial.normalize();
          const double r = rate(trial);
          if (r < best) {
            best = r;
            arg = trial;
            improved = true;
          }
        }
      }
    }
  }
  out.rate = best;
  out.argmin = arg;
  const double relative = worst > 0.0 ? std::pow(best / worst, 1.0 / sys.alpha) : 0.0;
  out.degenerate = out.gramian_ratio <= 1e-10 || relative <= 1e-6;
  return out;
}

MomentIntegral smoothness_moment_integral(const OuSystem& sys, double t, double m, double radius) {
  const int d = static_cast<int>(sys.b.rows());
  if (d < 1 || d > 3) throw std::invalid_argument("moment integral supports d <= 3");
  if (m < 0.0) throw std::invalid_argument("moment order must be nonnegative");
  if (radius < 0.0) throw std::invalid_argument("radius must be positive");
  MomentIntegral out;
  out.decay = ou_decay_rate(sys, t);
  out.flagged = out.decay.degenerate;
  const double kappa_min = sys.c_l * out.decay.rate;

  const OuExponent exponent(sys, t);
  auto integrate_to = [&](double r) {
    return sphere_integral(d, [&](const Eigen::VectorXd& w) {
      return radial_integral(sys.c_l * exponent(w), m, d, sys.alpha, r);
    });
  };
  auto tail_at = [&](double r) { return sphere_area(d) * radial_tail(kappa_min, m, d, sys.alpha, r); };

  if (radius == 0.0) {
    if (out.flagged) throw std::invalid_argument("degenerate system needs an explicit radius");
    const double bulk = integrate_to(std::numeric_limits<double>::infinity());
    radius = 1.0;
    while (tail_at(radius) > 1e-6 * bulk && radius < 1e12) radius *= 2.0;
  }
  out.radius = radius;
  out.value = integrate_to(radius);
  out.tail_bound = out.flagged ? std::numeric_limits<double>::infinity() : tail_at(radius);
  return out;
}

double levy_quadrature(const SubordinatorSpec& spec, const GaussianSmoothed& g, double tol) {
  constexpr double s_min = 1e-10;
  constexpr double s_max = 1e12;
  const double top = g.average(s_max);
  const double higher = g.average(1e2 * s_max);
  if (!std::isfinite(top) || !std::isfinite(higher) || std::abs(higher - top) > 1e-3 * std::max(1.0, std::abs(top))) {
    throw QuadratureError("tail divergence: averaged functional still varies at large variance");
  }
  const double small = g.average(s_min) / s_min * spec.truncated_first_moment(s_min);
  const double bulk = adaptive(
      [&](double u) {
        const double s = std::exp(u);
        return g.average(s) * spec.density(s) * s;
      },
      std::log(s_min), std::log(s_max), tol, 20, "Levy mixture");
  return small + bulk + g.limit * spec.tail_mass(s_max);
}

double half_stable_subordinator_cdf(double c, double horizon, double eps) {
  if (!(eps > 0.0)) return 0.0;
  return boost::math::erfc(c * std::sqrt(kPi) * horizon / std::sqrt(eps));
}

double symmetric_stable_density(double alpha, double scale, double x) {
  if (!(alpha > 0.0 && alpha <= 2.0) || !(scale > 0.0)) throw std::invalid_argument("bad stable parameters");
  if (alpha == 1.0) return scale / (kPi * (scale * scale + x * x));
  if (alpha == 2.0) return std::exp(-x * x / (4.0 * scale)) / std::sqrt(4.0 * kPi * scale);
  if (alpha > 1.0) {
    const double zmax = std::pow(45.0 / scale, 1.0 / alpha);
    return adaptive([&](double z) { return std::cos(z * x) * std::exp(-scale * std::pow(z, alpha)); }, 0.0, zmax,
                    1e-10, 15, "stable density") /
           kPi;
  }
  // z = w^(1/alpha) makes the weight e^(-scale w) and removes the cusp at 0;
  // pieces keep the oscillation per panel bounded.
  const double p = 1.0 / alpha;
  auto g = [&](double w) { return w == 0.0 ? 0.0 : std::cos(x * std::pow(w, p)) * std::exp(-scale * w) * p * std::pow(w, p - 1.0); };
  const double wmax = 45.0 / scale;
  constexpr int kPieces = 64;
  // Tail pieces are tiny, so the error is judged against the total.
  double sum = 0.0, err_sum = 0.0, l1_sum = 0.0;
  for (int k = 0; k < kPieces; ++k) {
    double err = 0.0, l1 = 0.0;
    sum += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(g, wmax * k / kPieces, wmax * (k + 1) / kPieces,
                                                                         20, 1e-12, &err, &l1);
    err_sum += err;
    l1_sum += l1;
  }
  if (!std::isfinite(sum) || err_sum > 1e-10 * l1_sum) throw QuadratureError("quadrature tolerance not met: stable density");
  return sum / kPi;
}

}  // namespace subsde
