#include "subsde/levy_subordinator.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace subsde {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kQuadRelTol = 1e-9;

// int_0^inf g(x) dx for g decaying at least exponentially; the log-scale
// substitutions below put every custom-kind integral in this form.
double half_line_integral(const std::function<double(double)>& g, const char* what) {
  boost::math::quadrature::exp_sinh<double> integrator;
  double error = 0.0;
  double l1 = 0.0;
  const double value = integrator.integrate(g, kQuadRelTol, &error, &l1);
  if (!std::isfinite(value) || error > 1e-7 * std::max(l1, 1e-300) + 1e-300) {
    throw QuadratureError(std::string("quadrature did not converge: ") + what);
  }
  return value;
}

// Integrands below vanish at both ends of the substituted range; underflow
// of u to 0 or overflow to inf must not produce 0 * inf.
double finite_or_zero(double v) { return std::isfinite(v) ? v : 0.0; }

void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw std::invalid_argument(std::string(name) + " must be positive and finite");
  }
}

}  // namespace

SubordinatorSpec SubordinatorSpec::stable(double beta, double c) {
  if (!(beta > 0.0 && beta < 1.0)) {
    throw std::invalid_argument("stable subordinator index beta must lie in (0,1)");
  }
  require_positive(c, "intensity scale c");
  SubordinatorSpec spec;
  spec.kind_ = SubordinatorKind::stable;
  spec.beta_ = beta;
  spec.c_ = c;
  spec.envelope_index_ = beta;
  spec.label_ = "stable";
  return spec;
}

SubordinatorSpec SubordinatorSpec::custom(Density density, double envelope_index, std::string label) {
  if (!density) throw std::invalid_argument("custom subordinator needs a density evaluator");
  require_positive(envelope_index, "envelope index");
  SubordinatorSpec spec;
  spec.kind_ = SubordinatorKind::custom;
  spec.beta_ = std::numeric_limits<double>::quiet_NaN();
  spec.c_ = std::numeric_limits<double>::quiet_NaN();
  spec.envelope_index_ = envelope_index;
  spec.label_ = std::move(label);
  spec.density_ = std::move(density);

  // int_0^1 u nu(du) + nu([1, inf)) must be finite.
  double small = 0.0;
  double large = 0.0;
  try {
    small = spec.truncated_first_moment(1.0);
    large = spec.tail_mass(1.0);
  } catch (const std::exception&) {
    throw std::invalid_argument("custom density fails int (1 ^ u) nu(du) < inf");
  }
  if (!std::isfinite(small) || !std::isfinite(large) || small < 0.0 || large < 0.0) {
    throw std::invalid_argument("custom density fails int (1 ^ u) nu(du) < inf");
  }
  return spec;
}

double SubordinatorSpec::density(double u) const {
  if (!(u > 0.0)) return 0.0;
  if (kind_ == SubordinatorKind::stable) return c_ * std::pow(u, -1.0 - beta_);
  return density_(u);
}

double SubordinatorSpec::tail_mass(double eps) const {
  require_positive(eps, "tail level");
  if (eps == kInf) return 0.0;
  if (kind_ == SubordinatorKind::stable) return c_ / beta_ * std::pow(eps, -beta_);
  // u = eps * e^x
  return half_line_integral(
      [&](double x) {
        const double u = eps * std::exp(x);
        return finite_or_zero(u * density_(u));
      },
      "tail mass");
}

double SubordinatorSpec::interval_mass(double lo, double hi) const {
  require_positive(lo, "interval lower end");
  if (!(hi > lo)) return 0.0;
  if (hi == kInf) return tail_mass(lo);
  if (kind_ == SubordinatorKind::stable) {
    return c_ / beta_ * (std::pow(lo, -beta_) - std::pow(hi, -beta_));
  }
  double error = 0.0;
  const double value = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
      [&](double x) {
        const double u = std::exp(x);
        return finite_or_zero(u * density_(u));
      },
      std::log(lo), std::log(hi), 15, kQuadRelTol, &error);
  if (error > 1e-7 * std::max(std::abs(value), 1e-300)) throw QuadratureError("interval mass");
  return value;
}

double SubordinatorSpec::truncated_first_moment(double eps) const {
  if (!(eps >= 0.0)) throw std::invalid_argument("truncation level must be nonnegative");
  if (eps == 0.0) return 0.0;
  if (kind_ == SubordinatorKind::stable) return c_ * std::pow(eps, 1.0 - beta_) / (1.0 - beta_);
  // u = eps * e^-x
  return half_line_integral(
      [&](double x) {
        const double u = eps * std::exp(-x);
        return finite_or_zero(u * u * density_(u));
      },
      "truncated first moment");
}

double SubordinatorSpec::truncated_second_moment(double eps) const {
  if (!(eps >= 0.0)) throw std::invalid_argument("truncation level must be nonnegative");
  if (eps == 0.0) return 0.0;
  if (kind_ == SubordinatorKind::stable) return c_ * std::pow(eps, 2.0 - beta_) / (2.0 - beta_);
  return half_line_integral(
      [&](double x) {
        const double u = eps * std::exp(-x);
        return finite_or_zero(u * u * u * density_(u));
      },
      "truncated second moment");
}

SubordinatorSpec make_stable_spec(double beta, double c) {
  return SubordinatorSpec::stable(beta, c);
}

double truncated_first_moment(const SubordinatorSpec& spec, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("truncation level must be positive");
  return spec.truncated_first_moment(eps);
}

Con2Report check_con2(const SubordinatorSpec& spec, double theta, const std::vector<double>& eps_grid) {
  if (!(theta > 0.0 && theta < 0.5)) throw std::invalid_argument("theta must lie in (0, 1/2)");
  if (eps_grid.empty()) throw std::invalid_argument("eps grid is empty");
  for (std::size_t i = 0; i < eps_grid.size(); ++i) {
    if (!(eps_grid[i] > 0.0)) throw std::invalid_argument("eps grid must be positive");
    if (i > 0 && !(eps_grid[i] < eps_grid[i - 1])) {
      throw std::invalid_argument("eps grid must be strictly decreasing");
    }
  }
  Con2Report report;
  report.ratios.reserve(eps_grid.size());
  for (double eps : eps_grid) {
    report.ratios.push_back(std::pow(eps, -(1.0 - 2.0 * theta)) * spec.truncated_first_moment(eps));
  }
  report.limit = report.ratios.back();
  const std::size_t n = report.ratios.size();
  if (n >= 3) {
    auto close = [](double a, double b) { return std::abs(a - b) < 0.01 * std::abs(b); };
    report.converged = report.limit > 0.0 && close(report.ratios[n - 2], report.ratios[n - 1]) &&
                       close(report.ratios[n - 3], report.ratios[n - 2]);
  }
  return report;
}

double phi(const SubordinatorSpec& spec, double lambda, double f_sup) {
  require_positive(lambda, "lambda");
  require_positive(f_sup, "f_sup");
  return 0.5 * lambda * spec.truncated_first_moment(std::log(2.0) / (lambda * f_sup));
}

double exponential_clock_bound(const SubordinatorSpec& spec, double eps, double delta, double f_sup) {
  require_positive(eps, "eps");
  require_positive(delta, "delta");
  return std::exp(1.0 - phi(spec, 1.0 / eps, f_sup) * delta);
}

double big_jump_rate(const SubordinatorSpec& spec) {
  const double rate = spec.tail_mass(1.0);
  if (!std::isfinite(rate)) throw std::invalid_argument("infinite mass of jumps >= 1");
  return rate;
}

JumpSizeSampler::JumpSizeSampler(const SubordinatorSpec& spec, double lo, double hi)
    : spec_(&spec), lo_(lo), hi_(hi), mass_(spec.interval_mass(lo, hi)) {
  require_positive(lo, "jump size lower bound");
  if (!(hi > lo)) throw std::invalid_argument("empty jump size range");
  gamma_ = spec.kind() == SubordinatorKind::stable ? spec.beta() : spec.envelope_index();
  upper_factor_ = hi == kInf ? 1.0 : 1.0 - std::pow(hi / lo, -gamma_);
  envelope_ = 0.0;
  if (spec.kind() == SubordinatorKind::custom) {
    // Envelope constant from a log-grid scan of u^(1+gamma) * density(u).
    const double top = hi == kInf ? lo * 1e8 : hi;
    const int n = 400;
    const double step = std::log(top / lo) / n;
    for (int i = 0; i <= n; ++i) {
      const double u = lo * std::exp(step * i);
      envelope_ = std::max(envelope_, std::pow(u, 1.0 + gamma_) * spec.density(u));
    }
    envelope_ *= 1.1;
    if (!(envelope_ > 0.0) || !std::isfinite(envelope_)) {
      throw std::invalid_argument("custom density has no usable Pareto envelope");
    }
  }
}

double JumpSizeSampler::operator()(Rng& rng) const {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  // Pareto(gamma) on [lo, hi) by inverse tail: u = lo * (1 - v * upper)^(-1/gamma).
  auto pareto = [&] {
    const double v = unif(rng);
    return lo_ * std::pow(1.0 - v * upper_factor_, -1.0 / gamma_);
  };
  if (spec_->kind() == SubordinatorKind::stable) return std::min(pareto(), hi_);
  for (int attempt = 0; attempt < 100000; ++attempt) {
    const double u = std::min(pareto(), hi_);
    const double bound = envelope_ * std::pow(u, -1.0 - gamma_);
    const double ratio = spec_->density(u) / bound;
    if (ratio > 1.0) throw std::runtime_error("custom density exceeded its Pareto envelope");
    if (unif(rng) < ratio) return u;
  }
  throw std::runtime_error("rejection sampler failed to accept a jump size");
}

double SubordinatorPath::value_at(double t) const {
  double s = drift_rate * std::min(t, horizon);
  for (const auto& jump : jumps) {
    if (jump.time > t) break;
    s += jump.size;
  }
  return s;
}

namespace {

SubordinatorPath sample_clock(const SubordinatorSpec& spec, double horizon, double eps, double top, Rng& rng) {
  if (!(eps > 0.0 && eps < 1.0)) throw std::invalid_argument("truncation eps must lie in (0,1)");
  if (!(horizon >= 0.0) || !std::isfinite(horizon)) throw std::invalid_argument("horizon must be >= 0");
  SubordinatorPath path;
  path.horizon = horizon;
  path.cut = eps;
  path.drift_rate = spec.truncated_first_moment(eps);
  path.neglected_variance = horizon * spec.truncated_second_moment(eps);
  if (horizon == 0.0) return path;

  const JumpSizeSampler sizes(spec, eps, top);
  std::poisson_distribution<long> count_dist(horizon * sizes.mass());
  const long count = count_dist(rng);
  std::vector<double> times(static_cast<std::size_t>(count));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  // (0, horizon]: 1 - U with U in [0, 1)
  for (auto& t : times) t = horizon * (1.0 - unif(rng));
  std::sort(times.begin(), times.end());
  path.jumps.reserve(times.size());
  for (double t : times) {
    const double size = sizes(rng);
    if (!path.jumps.empty() && path.jumps.back().time == t) {
      path.jumps.back().size += size;  // coincident times merge into one jump
    } else {
      path.jumps.push_back({t, size});
    }
  }
  return path;
}

}  // namespace

SubordinatorPath sample_path(const SubordinatorSpec& spec, double horizon, double eps, Rng& rng) {
  return sample_clock(spec, horizon, eps, kInf, rng);
}

SubordinatorPath sample_small_jump_path(const SubordinatorSpec& spec, double horizon, double eps, Rng& rng) {
  return sample_clock(spec, horizon, eps, 1.0, rng);
}

Vec sample_big_jump_displacement(const SubordinatorSpec& spec, int d, Rng& rng) {
  if (d < 1 || d > kMaxDim) throw std::invalid_argument("displacement dimension out of range");
  const JumpSizeSampler sizes(spec, 1.0, kInf);
  const double s = sizes(rng);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vec xi(d);
  const double scale = std::sqrt(s);
  for (int i = 0; i < d; ++i) xi[i] = scale * normal(rng);
  return xi;
}

std::string spec_to_config(const SubordinatorSpec& spec, double eps) {
  if (spec.kind() != SubordinatorKind::stable) {
    throw std::invalid_argument("only stable subordinators serialize to config");
  }
  std::ostringstream os;
  os << std::setprecision(17);
  os << "kind=stable\n";
  os << "beta=" << spec.beta() << "\n";
  os << "c=" << spec.c() << "\n";
  os << "eps=" << eps << "\n";
  return os.str();
}

void write_path_csv(std::ostream& os, const SubordinatorPath& path) {
  os << "time,jump_size\n";
  os << std::setprecision(17);
  for (const auto& jump : path.jumps) os << jump.time << ',' << jump.size << '\n';
}

}  // namespace subsde
