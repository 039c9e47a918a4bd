#pragma once

#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "subsde/linalg.hpp"
#include "subsde/random.hpp"

namespace subsde {

/// Raised when an adaptive quadrature misses its tolerance.
class QuadratureError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class SubordinatorKind { stable, custom };

/// Levy measure of a subordinator (an increasing Levy process used as a
/// random clock). The stable kind has density c * u^(-1-beta) on (0, inf)
/// and closed forms for every functional; the custom kind wraps a density
/// evaluator and falls back to quadrature.
class SubordinatorSpec {
 public:
  using Density = std::function<double(double)>;

  /// Throws std::invalid_argument unless 0 < beta < 1 and c > 0.
  static SubordinatorSpec stable(double beta, double c);

  /// Custom density. `envelope_index` is a gamma > 0 such that
  /// u^(1+gamma) * density(u) stays bounded on [eps, inf); it shapes the
  /// Pareto proposal used for jump sampling. The integrability condition
  /// int (1 ^ u) nu(du) < inf is checked numerically here.
  static SubordinatorSpec custom(Density density, double envelope_index, std::string label = "custom");

  SubordinatorKind kind() const { return kind_; }
  double beta() const { return beta_; }
  double c() const { return c_; }
  double envelope_index() const { return envelope_index_; }
  const std::string& label() const { return label_; }

  double density(double u) const;

  /// nu([eps, inf)).
  double tail_mass(double eps) const;
  /// nu([lo, hi)); hi may be +inf.
  double interval_mass(double lo, double hi) const;
  /// int_0^eps u nu(du).
  double truncated_first_moment(double eps) const;
  /// int_0^eps u^2 nu(du); the variance rate dropped by drift compensation.
  double truncated_second_moment(double eps) const;

 private:
  SubordinatorSpec() = default;

  SubordinatorKind kind_ = SubordinatorKind::stable;
  double beta_ = 0.5;
  double c_ = 1.0;
  double envelope_index_ = 0.5;
  std::string label_ = "stable";
  Density density_;
};

SubordinatorSpec make_stable_spec(double beta, double c);
double truncated_first_moment(const SubordinatorSpec& spec, double eps);

struct Con2Report {
  std::vector<double> ratios;  ///< eps^-(1-2 theta) * int_0^eps u nu(du), per grid level
  double limit = 0.0;          ///< last ratio, the fitted limit c_theta
  bool converged = false;      ///< last three ratios agree within 1%
};

/// Ratio sequence for the small-jump scaling condition with exponent theta.
/// Needs theta in (0, 1/2) and a strictly decreasing positive grid.
Con2Report check_con2(const SubordinatorSpec& spec, double theta, const std::vector<double>& eps_grid);

/// phi(lambda) = (lambda / 2) * int_0^{log 2 / (lambda f_sup)} u nu(du).
double phi(const SubordinatorSpec& spec, double lambda, double f_sup);

/// e^(1 - phi(1/eps) delta): bound on P{int f dS <= eps; int f ds > delta}
/// with f bounded by f_sup.
double exponential_clock_bound(const SubordinatorSpec& spec, double eps, double delta, double f_sup = 1.0);

/// lambda = nu([1, inf)), the rate of clock jumps of size at least one.
double big_jump_rate(const SubordinatorSpec& spec);

/// Draws from nu restricted to [lo, hi), normalized. Closed-form inverse
/// tail for the stable kind; Pareto-envelope rejection for the custom kind.
class JumpSizeSampler {
 public:
  JumpSizeSampler(const SubordinatorSpec& spec, double lo, double hi);
  double operator()(Rng& rng) const;
  double mass() const { return mass_; }

 private:
  const SubordinatorSpec* spec_;
  double lo_;
  double hi_;
  double mass_;
  double gamma_;          // proposal Pareto index
  double upper_factor_;   // 1 - (hi/lo)^-gamma, 1 when hi is infinite
  double envelope_;       // K with density(u) <= K u^(-1-gamma)
};

struct ClockJump {
  double time;
  double size;
};

/// One realized clock path on [0, horizon]: jumps of size >= cut plus a
/// drift at rate int_0^cut u nu(du) standing in for the smaller jumps.
struct SubordinatorPath {
  double horizon = 0.0;
  std::vector<ClockJump> jumps;  ///< strictly increasing times in (0, horizon]
  double drift_rate = 0.0;
  double cut = 0.0;
  double neglected_variance = 0.0;  ///< horizon * int_0^cut u^2 nu(du)

  /// S_t = drift_rate * t + sum of jumps at times <= t.
  double value_at(double t) const;
  double terminal() const { return value_at(horizon); }
};

inline constexpr double kDefaultCut = 1e-4;

/// Samples a clock path. Requires 0 < eps < 1 and horizon >= 0.
SubordinatorPath sample_path(const SubordinatorSpec& spec, double horizon, double eps, Rng& rng);

/// Clock path keeping only jumps in [eps, 1) (plus the sub-eps drift); the
/// jumps of size >= 1 are left to an independent compound Poisson part.
SubordinatorPath sample_small_jump_path(const SubordinatorSpec& spec, double horizon, double eps, Rng& rng);

/// Displacement of one big jump of W_S: s ~ nu on [1, inf) normalized, then
/// a centered Gaussian with covariance s * I in d dimensions.
Vec sample_big_jump_displacement(const SubordinatorSpec& spec, int d, Rng& rng);

/// key=value serialization (kind, beta, c, eps); stable kind only.
std::string spec_to_config(const SubordinatorSpec& spec, double eps);

/// CSV rows (time, jump_size) with a header line.
void write_path_csv(std::ostream& os, const SubordinatorPath& path);

}  // namespace subsde
