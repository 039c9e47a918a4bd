#include <cmath>
#include <sstream>

#include "doctest.h"
#include "subsde/analytic_oracles.hpp"
#include "subsde/malliavin.hpp"

using namespace subsde;

TEST_CASE("additive identity noise: covariance is the clock times the identity") {
  const auto model = zero_drift_model(Mat::Identity(2, 2));
  Rng rng(1);
  const auto clock = sample_path(make_stable_spec(0.5, 1.0), 1.0, 1e-3, rng);
  const auto bundle = integrate(model, synthesize_noise(clock, 2, 0.01, rng), Vec::Zero(2));
  const auto cov = covariance(model, bundle, clock, 1.0);
  const double s = clock.terminal();
  CHECK((cov.sigma - s * Eigen::MatrixXd::Identity(2, 2)).norm() < 1e-12 * s);
  const double mid = bundle.times[bundle.times.size() / 2];
  CHECK(covariance(model, bundle, clock, mid).sigma(0, 0) == doctest::Approx(clock.value_at(mid)).epsilon(1e-12));
  CHECK_THROWS(covariance(model, bundle, clock, 0.123456789));
}

TEST_CASE("kinetic drift part integrates the controllability Gramian exactly") {
  // No jumps: C_t = r int_0^t K_s A A^T K_s^T ds with K_s = e^{-sB}.
  const auto model = kinetic_linear_model();
  SubordinatorPath clock;
  clock.horizon = 1.5;
  clock.drift_rate = 0.3;
  Rng rng(2);
  const auto bundle = integrate(model, synthesize_noise(clock, 2, 0.1, rng), Vec::Zero(2));
  const auto cov = covariance(model, bundle, clock, 1.5);
  const double t = 1.5, r = 0.3;
  Eigen::Matrix2d c;
  c << t * t * t / 3.0, -t * t / 2.0, -t * t / 2.0, t;
  CHECK((cov.reduced - r * c).norm() < 1e-12);
  const Eigen::MatrixXd j = expm(t * Eigen::MatrixXd(model.jacobian(Vec::Zero(2))));
  CHECK((cov.sigma - j * cov.reduced * j.transpose()).norm() < 1e-12);
}

TEST_CASE("directional energy of the degenerate control vanishes exactly") {
  Mat a = Mat::Zero(2, 2);
  a(1, 1) = 1.0;
  const auto model = zero_drift_model(a);
  Eigen::RowVectorXd dir(2);
  dir << 1.0, 0.0;
  for (std::uint64_t i = 0; i < 50; ++i) {
    Rng rng = make_stream(3, i);
    const auto clock = sample_path(make_stable_spec(0.5, 1.0), 1.0, 1e-3, rng);
    const auto bundle = integrate(model, synthesize_noise(clock, 2, 0.05, rng), Vec::Zero(2));
    REQUIRE(directional_energy(model, bundle, clock, dir, 1.0) == 0.0);
  }
}

TEST_CASE("directional energy requires a unit covector") {
  MalliavinCovariance cov;
  cov.reduced = Eigen::MatrixXd::Identity(2, 2);
  Eigen::RowVectorXd a(2);
  a << 1.0, 1.0;
  CHECK_THROWS_AS(directional_energy(cov, a), std::invalid_argument);
  a.normalize();
  CHECK(directional_energy(cov, a) == doctest::Approx(1.0));
}

TEST_CASE("Wilson interval reference values") {
  const auto w = wilson_interval(50, 100, 1.96);
  CHECK(w.lo == doctest::Approx(0.403829828590147154).epsilon(1e-14));
  CHECK(w.hi == doctest::Approx(0.596170171409852846).epsilon(1e-14));
  const auto z = wilson_interval(0, 1000, 2.5758293035489004);
  CHECK(z.lo == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(z.hi == doctest::Approx(0.0065911649034068290).epsilon(1e-12));
  CHECK_THROWS(wilson_interval(3, 2, 1.96));
}

TEST_CASE("small-ball probabilities of the identity system follow the clock law") {
  const auto model = zero_drift_model(Mat::Identity(2, 2));
  const auto spec = make_stable_spec(0.5, 1.0);
  Eigen::RowVectorXd a(2);
  a << 0.6, 0.8;
  const std::vector<double> eps = {0.3, 0.6, 1.0};
  SmallBallOptions opt;
  opt.dt_max = 0.05;
  const auto prof = small_ball_profile(model, spec, Vec::Zero(2), 0.2, {a}, eps, 10000, 4, opt);
  REQUIRE(prof.rows.size() == eps.size());
  for (const auto& row : prof.rows) {
    const double p = half_stable_subordinator_cdf(1.0, 0.2, row.eps);
    CHECK(row.ci_lo <= p);
    CHECK(p <= row.ci_hi);
  }
  REQUIRE(prof.slopes.size() == 1);
  CHECK(prof.slopes[0] > 0.0);
  CHECK_THROWS(small_ball_profile(model, spec, Vec::Zero(2), 0.2, {a}, eps, 100, 4, opt));

  std::ostringstream os;
  write_profile_csv(os, prof);
  CHECK(os.str().rfind("a_index,eps,p_hat,ci_lo,ci_hi\n", 0) == 0);
}
