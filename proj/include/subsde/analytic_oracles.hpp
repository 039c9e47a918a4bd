#pragma once

#include <complex>
#include <functional>
#include <vector>

#include "subsde/levy_subordinator.hpp"

namespace subsde {

/// dX = B X dt + A dL with L rotationally symmetric alpha-stable of symbol
/// c_L |z|^alpha.
struct OuSystem {
  Eigen::MatrixXd b;
  Eigen::MatrixXd a;
  double alpha = 1.0;
  double c_l = 1.0;
};

struct StableCalibration {
  double alpha = 1.0;
  double c_l = 1.0;
};

/// alpha = 2 beta and c_L = c Gamma(1 - beta) / (beta 2^beta), from
/// E exp(i z . W_S) = E exp(-|z|^2 S / 2). Custom specs have no closed form
/// and raise std::invalid_argument.
StableCalibration stable_calibration(const SubordinatorSpec& spec);

OuSystem make_ou_system(const Eigen::MatrixXd& b, const Eigen::MatrixXd& a, const SubordinatorSpec& spec);

/// int_0^t |z^T e^{sB} A|^alpha ds for many z at fixed (sys, t).
///
/// e^{sB} A is cached at Gauss-Legendre nodes on 32 panels. A panel on
/// which the integrand dips towards zero (a kink when alpha = 1, an
/// algebraic singularity of the derivative otherwise) is split at the
/// minimizer and both halves go to tanh-sinh quadrature.
class OuExponent {
 public:
  OuExponent(const OuSystem& sys, double t);
  double operator()(const Eigen::VectorXd& z) const;

 private:
  double direct(const Eigen::RowVectorXd& zt, double s) const;

  OuSystem sys_;
  double t_;
  std::vector<double> nodes_;
  std::vector<double> weights_;
  std::vector<Eigen::MatrixXd> cached_;  // e^{s B} A per node
};

double ou_exponent(const OuSystem& sys, double t, const Eigen::VectorXd& z);

/// exp(-c_L int_0^t |z^T e^{sB} A|^alpha ds), the CF of X_t - e^{tB} x0.
std::complex<double> ou_char_function(const OuSystem& sys, double t, const Eigen::VectorXd& z);

struct DecayRate {
  double rate = 0.0;       ///< min over probed unit a of int_0^t |a e^{sB} A|^alpha ds
  Eigen::VectorXd argmin;
  double gramian_ratio = 0.0;  ///< lambda_min / lambda_max of int e^{sB} A A^T e^{sB^T} ds
  bool degenerate = false;
};

/// Probes the Gramian eigenvectors, a quasi-uniform direction set and a
/// local refinement around the best candidate.
DecayRate ou_decay_rate(const OuSystem& sys, double t);

struct MomentIntegral {
  double value = 0.0;
  double tail_bound = 0.0;
  double radius = 0.0;
  DecayRate decay;
  bool flagged = false;  ///< degenerate system: the full integral may diverge
};

/// int_{|z| <= R} |z|^m |CF_t(z)| dz for d <= 3 in polar form; the radial
/// integral is an incomplete gamma function. R <= 0 grows R until the tail
/// bound falls below 1e-6 of the bulk.
MomentIntegral smoothness_moment_integral(const OuSystem& sys, double t, double m, double radius = 0.0);

/// E g(sqrt(s) G), G standard Gaussian, as a function of the variance s,
/// together with its limit as s -> inf.
struct GaussianSmoothed {
  std::function<double(double)> average;
  double limit = 0.0;
};

/// int g d(nu_L) = int_0^inf E g(sqrt(s) G) nu_S(ds). Uses the linear
/// behaviour below s = 1e-10 and the tail mass above s = 1e12; raises
/// QuadratureError when the averaged functional still grows at the top.
double levy_quadrature(const SubordinatorSpec& spec, const GaussianSmoothed& g, double tol = 1e-12);

/// P{S_T <= eps} for the stable clock with beta = 1/2: erfc(c sqrt(pi) T / sqrt(eps)).
double half_stable_subordinator_cdf(double c, double horizon, double eps);

/// Density at x of the 1-D symmetric law with CF exp(-scale |z|^alpha).
double symmetric_stable_density(double alpha, double scale, double x);

}  // namespace subsde
