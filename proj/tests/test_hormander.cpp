#include <cmath>
#include <sstream>

#include "doctest.h"
#include "subsde/hormander.hpp"

using namespace subsde;

namespace {

Mat diag01() {
  Mat a = Mat::Zero(2, 2);
  a(1, 1) = 1.0;
  return a;
}

}  // namespace

TEST_CASE("numerical rank counts singular values above the relative tolerance") {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(3, 3);
  m(0, 0) = 1.0;
  m(1, 1) = 1e-6;
  m(2, 2) = 1e-10;
  const auto r = numerical_rank(m);
  CHECK(r.rank == 2);
  CHECK_FALSE(r.full);
  CHECK(r.smallest_retained == doctest::Approx(1e-6));
  CHECK(numerical_rank(m, 1e-12).full);
  CHECK(numerical_rank(Eigen::MatrixXd::Zero(2, 2)).rank == 0);
}

TEST_CASE("kinetic system: brackets restore the rank the noise lacks") {
  const auto model = kinetic_linear_model();
  CHECK(kalman_rank(Eigen::MatrixXd(model.jacobian(Vec::Zero(2))), Eigen::MatrixXd(model.a)) == 2);
  Vec x(2);
  x << 0.3, -1.2;
  CHECK(check_hn(model, x, 1).full);
  const auto h = bracket_hierarchy(model, x, 1);
  REQUIRE(h.matrices.size() == 1);
  CHECK((h.matrices[0] - Eigen::MatrixXd(model.jacobian(x))).norm() < 1e-12);
  CHECK(h.stacked.cols() == 4);
  CHECK(uniform_h1_constant(model, {x}) == doctest::Approx(1.0));
}

TEST_CASE("degenerate noise without drift coupling fails the rank test") {
  const auto model = zero_drift_model(diag01());
  Vec x = Vec::Zero(2);
  CHECK_FALSE(check_hn(model, x, 1).full);
  CHECK(kalman_rank(Eigen::MatrixXd::Zero(2, 2), Eigen::MatrixXd(diag01())) == 1);
  CHECK(uniform_h1_constant(model, {x}) == 0.0);
}

TEST_CASE("pendulum second bracket: analytic and finite-difference routes agree") {
  auto analytic = pendulum_model();
  auto numeric = pendulum_model();
  numeric.jacobian_derivative = nullptr;
  Vec x(2);
  x << 0.7, -0.4;
  const auto ha = bracket_hierarchy(analytic, x, 2);
  const auto hn = bracket_hierarchy(numeric, x, 2);
  REQUIRE(ha.matrices.size() == 2);
  REQUIRE(hn.matrices.size() == 2);
  // B_2 = (b . grad) grad b - grad b grad b, by hand for b = (v, sin x).
  Eigen::Matrix2d g, dg, expected;
  g << 0.0, 1.0, std::cos(x[0]), 0.0;
  dg << 0.0, 0.0, -std::sin(x[0]) * x[1], 0.0;
  expected = dg - g * g;
  CHECK((ha.matrices[1] - expected).norm() < 1e-12);
  CHECK((hn.matrices[1] - expected).norm() < 1e-7);
  CHECK(hn.unstable.empty());
}

TEST_CASE("high orders emit a warning") {
  Vec x = Vec::Zero(2);
  const auto h = bracket_hierarchy(pendulum_model(), x, 5);
  CHECK_FALSE(h.warnings.empty());
  CHECK_THROWS(bracket_hierarchy(pendulum_model(), x, 0));
}

TEST_CASE("higher diagnostics dominate the first-order constant") {
  const auto model = pendulum_model();
  std::vector<Vec> pts;
  for (double u : {-1.0, 0.0, 1.0}) {
    Vec x(2);
    x << u, 0.5 * u;
    pts.push_back(x);
  }
  const double h1 = uniform_h1_constant(model, pts);
  CHECK(h1 > 0.0);
  CHECK(uniform_hn_diagnostic(model, pts, 2) >= h1 - 1e-12);
}

TEST_CASE("rank csv layout") {
  std::vector<RankRow> rows;
  Vec x(2);
  x << 1.0, 2.0;
  rows.push_back({x, {true, 2, 0.5}});
  std::ostringstream os;
  write_rank_csv(os, rows);
  CHECK(os.str().rfind("x_1,x_2,rank,smallest_sigma,pass\n", 0) == 0);
}
