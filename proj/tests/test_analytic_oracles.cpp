#include <cmath>
#include <numbers>

#include <boost/math/distributions/chi_squared.hpp>

#include "doctest.h"
#include "subsde/analytic_oracles.hpp"

using namespace subsde;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

OuSystem kinetic() {
  MatrixXd b(2, 2), a = MatrixXd::Zero(2, 2);
  b << 0, 1, 0, 0;
  a(1, 1) = 1.0;
  return make_ou_system(b, a, make_stable_spec(0.5, 1.0));
}

VectorXd v2(double x, double y) {
  VectorXd v(2);
  v << x, y;
  return v;
}

// int_0^1 |z1 s + z2| ds
double kinetic_exponent(double z1, double z2) {
  auto prim = [&](double s) {
    const double u = z1 * s + z2;
    return u * std::abs(u) / (2.0 * z1);
  };
  if (std::abs(z1) < 1e-9 * std::abs(z2)) return std::abs(z2 + 0.5 * z1);
  return prim(1.0) - prim(0.0);
}

}  // namespace

TEST_CASE("stable calibration constants") {
  const auto a = stable_calibration(make_stable_spec(0.25, 1.0));
  CHECK(a.alpha == 0.5);
  CHECK(a.c_l == doctest::Approx(4.12179404917998233).epsilon(1e-14));
  const auto b = stable_calibration(make_stable_spec(0.5, 1.0));
  CHECK(b.alpha == 1.0);
  CHECK(b.c_l == doctest::Approx(2.5066282746310005).epsilon(1e-14));
  const auto custom = SubordinatorSpec::custom([](double u) { return std::pow(u, -1.5) * std::exp(-u); }, 0.5);
  CHECK_THROWS_AS(stable_calibration(custom), std::invalid_argument);
}

TEST_CASE("kinetic OU exponent against the piecewise-linear closed form") {
  const auto sys = kinetic();
  const OuExponent e(sys, 1.0);
  CHECK(e(v2(1.05, 0.0)) == doctest::Approx(0.525).epsilon(1e-12));
  CHECK(e(v2(2.1, 2.1)) == doctest::Approx(3.15).epsilon(1e-12));
  for (int k = 0; k < 400; ++k) {
    const double th = 2.0 * std::numbers::pi * (k + 0.37) / 400.0;
    const double r = 0.5 + 0.01 * k;
    const VectorXd z = v2(r * std::cos(th), r * std::sin(th));
    REQUIRE(e(z) == doctest::Approx(kinetic_exponent(z[0], z[1])).epsilon(1e-10));
  }
  CHECK(ou_exponent(sys, 0.0, v2(1, 1)) == 0.0);
  CHECK_THROWS(ou_exponent(sys, -1.0, v2(1, 1)));
}

TEST_CASE("kinetic characteristic function value") {
  const auto cf = ou_char_function(kinetic(), 1.0, v2(1.0, 0.0));
  CHECK(cf.real() == doctest::Approx(0.285556852298714116).epsilon(1e-12));
  CHECK(cf.imag() == 0.0);
}

TEST_CASE("driftless exponent is t |A^T z|^alpha") {
  const auto sys = make_ou_system(MatrixXd::Zero(2, 2), MatrixXd::Identity(2, 2), make_stable_spec(0.25, 1.0));
  CHECK(ou_exponent(sys, 2.0, v2(3.0, 4.0)) == doctest::Approx(2.0 * std::sqrt(5.0)).epsilon(1e-14));
}

TEST_CASE("decay rate: kinetic is non-degenerate, missing coupling is degenerate") {
  const auto d = ou_decay_rate(kinetic(), 1.0);
  CHECK_FALSE(d.degenerate);
  // Minimum over unit z of int_0^1 |z1 s + z2| ds, by brute force.
  double best = 1e9;
  for (int k = 0; k < 200000; ++k) {
    const double th = std::numbers::pi * k / 200000.0;
    best = std::min(best, kinetic_exponent(std::cos(th), std::sin(th)));
  }
  CHECK(d.rate == doctest::Approx(best).epsilon(1e-6));
  CHECK(d.argmin.norm() == doctest::Approx(1.0));

  MatrixXd a = MatrixXd::Zero(2, 2);
  a(1, 1) = 1.0;
  const auto flat = ou_decay_rate(make_ou_system(MatrixXd::Zero(2, 2), a, make_stable_spec(0.5, 1.0)), 1.0);
  CHECK(flat.degenerate);
}

TEST_CASE("smoothness integral of isotropic noise has closed forms") {
  const auto spec = make_stable_spec(0.5, 1.0);
  const double cl = stable_calibration(spec).c_l;
  const auto s1 = make_ou_system(MatrixXd::Zero(1, 1), MatrixXd::Identity(1, 1), spec);
  CHECK(smoothness_moment_integral(s1, 1.0, 0.0).value == doctest::Approx(2.0 / cl).epsilon(1e-6));
  const auto s2 = make_ou_system(MatrixXd::Zero(2, 2), MatrixXd::Identity(2, 2), spec);
  const auto m2 = smoothness_moment_integral(s2, 0.5, 0.0);
  CHECK(m2.value == doctest::Approx(2.0 * std::numbers::pi / std::pow(0.5 * cl, 2)).epsilon(1e-6));
  CHECK(m2.tail_bound <= 1e-6 * m2.value);
  // Second moment: 2 pi Gamma(4) / (c t)^4.
  const auto mm = smoothness_moment_integral(s2, 0.5, 2.0);
  CHECK(mm.value == doctest::Approx(12.0 * std::numbers::pi / std::pow(0.5 * cl, 4)).epsilon(1e-6));
}

TEST_CASE("kinetic moment integrals are finite and reproducible") {
  const auto m0 = smoothness_moment_integral(kinetic(), 1.0, 0.0);
  CHECK_FALSE(m0.flagged);
  CHECK(m0.value == doctest::Approx(4.546479089470317).epsilon(1e-6));
  CHECK(m0.tail_bound < 1e-6 * m0.value);
}

TEST_CASE("Levy quadrature of a truncated square against the chi-square closed form") {
  const auto spec = make_stable_spec(0.5, 1.0);
  boost::math::chi_squared c1(1.0), c3(3.0);
  GaussianSmoothed g;
  g.average = [&](double s) {
    if (s == 0.0) return 0.0;
    const double k = 1.0 / s;
    return s * boost::math::cdf(c3, k) + boost::math::cdf(boost::math::complement(c1, k));
  };
  g.limit = 1.0;
  CHECK(levy_quadrature(spec, g) == doctest::Approx(3.19153824321146140).epsilon(1e-9));

  GaussianSmoothed grows;
  grows.average = [](double s) { return s; };
  grows.limit = 0.0;
  CHECK_THROWS_AS(levy_quadrature(spec, grows), QuadratureError);
}

TEST_CASE("half-stable clock distribution function") {
  CHECK(half_stable_subordinator_cdf(1.0, 1.0, 0.5) == doctest::Approx(3.9275058828629412e-4).epsilon(1e-12));
  CHECK(half_stable_subordinator_cdf(1.0, 0.1, 0.05) == doctest::Approx(0.262288610179484196).epsilon(1e-12));
}

TEST_CASE("symmetric stable densities") {
  CHECK(symmetric_stable_density(0.5, 1.0, 1.0) == doctest::Approx(0.0861071469126041183).epsilon(1e-9));
  CHECK(symmetric_stable_density(1.0, 2.0, 1.0) == doctest::Approx(2.0 / (std::numbers::pi * 5.0)).epsilon(1e-14));
  CHECK(symmetric_stable_density(2.0, 0.5, 0.3) ==
        doctest::Approx(std::exp(-0.09 / 2.0) / std::sqrt(2.0 * std::numbers::pi)).epsilon(1e-14));
}
