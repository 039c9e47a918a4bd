#pragma once

#include <complex>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "subsde/analytic_oracles.hpp"
#include "subsde/sde_flow.hpp"

namespace subsde {

struct EnsembleMeta {
  std::string model;
  std::string spec;
  double t = 0.0;
  std::uint64_t seed = 0;
  std::size_t n = 0;
  double eps = kDefaultCut;
};

struct SampleEnsemble {
  std::vector<Vec> samples;
  EnsembleMeta meta;
};

struct EnsembleOptions {
  double eps = kDefaultCut;
  double dt_max = 0.0;  // 0: t / 100
  unsigned threads = 1;
};

/// Terminal states X_t of n seeded paths started at x0; path i uses stream i.
SampleEnsemble simulate_ensemble(const SdeModel& model, const SubordinatorSpec& spec, const Vec& x0, double t,
                                 std::size_t n, std::uint64_t seed, const EnsembleOptions& options = {});

struct CfEstimate {
  std::complex<double> value;
  double se = 0.0;  // sqrt((Var cos + Var sin) / N)
};

CfEstimate empirical_cf(const SampleEnsemble& ensemble, const Vec& z);

/// Tensor grid given by one uniform axis per coordinate.
struct KdeGrid {
  std::vector<std::vector<double>> axes;
};

struct KdeResult {
  KdeGrid grid;
  std::vector<double> values;  // row-major, last axis fastest
  double mass = 0.0;           // Riemann sum over the grid
};

/// Per-coordinate Silverman bandwidth with the MAD scale estimate.
std::vector<double> silverman_bandwidth(const SampleEnsemble& ensemble);

/// Product Gaussian kernel estimate on the grid.
KdeResult kde_density(const SampleEnsemble& ensemble, const KdeGrid& grid, const std::vector<double>& bandwidth);

/// Sum of constant, linear, cosine and Gaussian-bump terms. Every term has
/// a closed-form Gaussian average, which makes the jump part of the
/// generator a one-dimensional integral over the clock's Levy measure.
class TestFunction {
 public:
  static TestFunction constant(double c);
  static TestFunction linear(const Vec& g);
  /// weight * cos(z . y + phase)
  static TestFunction cosine(const Vec& z, double phase = 0.0, double weight = 1.0);
  /// weight * exp(-|y - center|^2 / (2 width^2))
  static TestFunction gaussian_bump(const Vec& center, double width, double weight = 1.0);

  TestFunction operator+(const TestFunction& other) const;
  TestFunction operator*(double k) const;

  double value(const Vec& y) const;
  Vec gradient(const Vec& y) const;
  /// E f(y + sqrt(s) A G), G standard Gaussian.
  double smoothed(const Vec& y, const Mat& a, double s) const;
  /// smoothed(y, a, s) - value(y), without cancellation at small s.
  double smoothed_increment(const Vec& y, const Mat& a, double s) const;
  /// Upper bound on sup |(tr(A A^T grad^2))^2 f|.
  double fourth_order_bound(const Mat& a) const;

 private:
  enum class Kind { constant, linear, cosine, bump };
  struct Term {
    Kind kind;
    double weight;
    Vec v;  // gradient, frequency or center
    double phase = 0.0;
    double width = 1.0;
  };
  std::vector<Term> terms_;
};

/// (L_A f)(y) + b(y) . grad f(y), the jump part in symmetrized form.
double generator_apply(const SdeModel& model, const SubordinatorSpec& spec, const TestFunction& f, const Vec& y);

struct FpOptions {
  std::size_t branches = 32;
  double eps = kDefaultCut;
  double dt_max = 0.0;  // 0: min(dt, t / 100)
  unsigned threads = 1;
};

struct FpReport {
  double lhs = 0.0;        // time derivative, central difference
  double rhs = 0.0;        // E generator at X_t
  double residual = 0.0;
  double sigma = 0.0;      // Monte Carlo standard error of lhs - rhs
  double time_error = 0.0; // |D(2 dt) - D(dt)| / 3
  double bias = 0.0;       // clock-truncation bias
  double budget = 0.0;     // 3 sigma + time_error + 2 bias
  bool pass = false;
};

/// Weak Fokker-Planck check at time t. Each of the n outer paths runs to
/// t - 2dt and then fans out into `branches` conditionally independent
/// continuations on [t - 2dt, t + 2dt]; all time points of a branch share
/// one noise realization. The generator is evaluated at X_t of the first
/// branch.
FpReport fokker_planck_residual(const SdeModel& model, const SubordinatorSpec& spec, const TestFunction& f,
                                const Vec& x0, double t, double dt, std::size_t n, std::uint64_t seed,
                                const FpOptions& options = {});

void write_cf_csv(std::ostream& os, const std::vector<Vec>& z, const std::vector<CfEstimate>& cf);
void write_kde_csv(std::ostream& os, const KdeResult& kde);
void write_residual_csv(std::ostream& os, const std::vector<std::string>& ids, const std::vector<FpReport>& reports);

}  // namespace subsde
