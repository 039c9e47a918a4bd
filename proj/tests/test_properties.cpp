// Randomized invariants. Each case draws its inputs from a fixed seed.
#include <algorithm>
#include <cmath>
#include <set>

#include "doctest.h"
#include "subsde/analytic_oracles.hpp"
#include "subsde/config.hpp"
#include "subsde/hormander.hpp"
#include "subsde/malliavin.hpp"
#include "subsde/parallel.hpp"
#include "subsde/stats_analysis.hpp"

using namespace subsde;
using Eigen::MatrixXd;

namespace {

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

MatrixXd random_matrix(Rng& rng, int r, int c) {
  MatrixXd m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = uniform(rng, -1.0, 1.0);
  return m;
}

}  // namespace

TEST_CASE("stream seeds are distinct and partition-independent") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 10000; ++i) seen.insert(stream_seed(123, i));
  CHECK(seen.size() == 10000);
  std::vector<double> a(1000), b(1000);
  auto draw = [](std::vector<double>& out) {
    return [&out](std::size_t i) {
      Rng r = make_stream(5, i);
      out[i] = std::normal_distribution<double>()(r);
    };
  };
  parallel_for(1000, 1, draw(a));
  parallel_for(1000, 4, draw(b));
  CHECK(a == b);
}

TEST_CASE("Levy measure mass is additive and monotone") {
  Rng rng(1);
  const auto custom = SubordinatorSpec::custom([](double u) { return std::pow(u, -1.3) * std::exp(-2.0 * u); }, 0.3);
  for (int k = 0; k < 40; ++k) {
    const double beta = uniform(rng, 0.1, 0.9);
    const auto stable = make_stable_spec(beta, uniform(rng, 0.2, 3.0));
    double pts[3] = {uniform(rng, 1e-3, 2.0), uniform(rng, 1e-3, 2.0), uniform(rng, 1e-3, 2.0)};
    std::sort(pts, pts + 3);
    for (const auto* spec : {&stable, &custom}) {
      const double whole = spec->interval_mass(pts[0], pts[2]);
      const double split = spec->interval_mass(pts[0], pts[1]) + spec->interval_mass(pts[1], pts[2]);
      REQUIRE(whole == doctest::Approx(split).epsilon(1e-9));
      REQUIRE(spec->tail_mass(pts[0]) >= spec->tail_mass(pts[2]));
      REQUIRE(spec->truncated_first_moment(pts[0]) <= spec->truncated_first_moment(pts[2]));
    }
  }
}

TEST_CASE("OU exponent is even and homogeneous of degree alpha") {
  Rng rng(2);
  for (int k = 0; k < 25; ++k) {
    const int d = 2 + k % 2;
    const double beta = uniform(rng, 0.3, 0.9);
    const auto sys = make_ou_system(random_matrix(rng, d, d), random_matrix(rng, d, d), make_stable_spec(beta, 1.0));
    const OuExponent e(sys, 0.8);
    const Eigen::VectorXd z = random_matrix(rng, d, 1);
    const double base = e(z);
    const double lambda = uniform(rng, 0.2, 3.0);
    REQUIRE(e(-z) == doctest::Approx(base).epsilon(1e-12));
    REQUIRE(e(lambda * z) == doctest::Approx(std::pow(lambda, sys.alpha) * base).epsilon(1e-8));
    const auto cf = ou_char_function(sys, 0.8, z);
    REQUIRE(std::abs(cf) <= 1.0);
  }
}

TEST_CASE("rank is invariant under orthogonal changes of coordinates") {
  Rng rng(3);
  for (int k = 0; k < 50; ++k) {
    const int d = 2 + k % 4;
    MatrixXd m = random_matrix(rng, d, 2 * d);
    if (k % 3 == 0) m.row(0) = m.row(1);  // force a deficiency
    const Eigen::HouseholderQR<MatrixXd> qr(random_matrix(rng, d, d));
    const MatrixXd q = qr.householderQ();
    REQUIRE(numerical_rank(m).rank == numerical_rank(q * m).rank);
  }
}

TEST_CASE("bracket rank agrees with the Kalman test on random linear systems") {
  Rng rng(4);
  for (int k = 0; k < 60; ++k) {
    const int d = 2 + k % 4;
    MatrixXd b = random_matrix(rng, d, d);
    MatrixXd a = MatrixXd::Zero(d, d);
    a(d - 1, d - 1) = 1.0;
    if (k % 4 == 0) b.row(0).setZero(), b.col(0).setZero();  // uncontrollable first coordinate
    const auto model = linear_model(Mat(b), Mat(a));
    const Vec x = Vec(random_matrix(rng, d, 1));
    REQUIRE(check_hn(model, x, std::max(d - 1, 1)).full == (kalman_rank(b, a) == d));
  }
}

TEST_CASE("Wilson intervals contain the estimate and shrink with n") {
  Rng rng(5);
  for (int k = 0; k < 100; ++k) {
    const std::size_t n = 10 + static_cast<std::size_t>(uniform(rng, 0, 1000));
    const std::size_t s = static_cast<std::size_t>(uniform(rng, 0, static_cast<double>(n)));
    const auto w = wilson_interval(s, n, 2.0);
    const double p = static_cast<double>(s) / static_cast<double>(n);
    REQUIRE(w.lo <= p + 1e-15);
    REQUIRE(p <= w.hi + 1e-15);
    const auto wide = wilson_interval(s, n, 3.0);
    REQUIRE(wide.hi - wide.lo >= w.hi - w.lo);
    const auto big = wilson_interval(4 * s, 4 * n, 2.0);
    REQUIRE(big.hi - big.lo <= w.hi - w.lo + 1e-15);
  }
}

TEST_CASE("smoothed increment vanishes linearly as the variance shrinks") {
  Rng rng(6);
  for (int k = 0; k < 30; ++k) {
    Vec z(2), c(2), y(2);
    z << uniform(rng, -2, 2), uniform(rng, -2, 2);
    c << uniform(rng, -1, 1), uniform(rng, -1, 1);
    y << uniform(rng, -1, 1), uniform(rng, -1, 1);
    const auto f = TestFunction::cosine(z, uniform(rng, 0, 3)) + TestFunction::gaussian_bump(c, uniform(rng, 0.3, 1.0));
    const Mat a = Mat(random_matrix(rng, 2, 2));
    const double g1 = f.smoothed_increment(y, a, 1e-6) / 1e-6;
    const double g2 = f.smoothed_increment(y, a, 2e-6) / 2e-6;
    REQUIRE(g1 == doctest::Approx(g2).epsilon(1e-4));
    REQUIRE(f.smoothed_increment(y, a, 0.0) == 0.0);
  }
}

TEST_CASE("refinement preserves jump data and totals for random paths") {
  const auto spec = make_stable_spec(0.6, 1.0);
  for (std::uint64_t i = 0; i < 30; ++i) {
    Rng rng = make_stream(7, i);
    const auto clock = sample_path(spec, 1.0, 1e-3, rng);
    const auto coarse = synthesize_noise(clock, 3, 0.05, rng);
    const auto fine = refine(coarse, rng);
    REQUIRE((fine.total() - coarse.total()).norm() < 1e-12);
    double jumps_c = 0.0, jumps_f = 0.0;
    for (const auto& c : coarse.cells) jumps_c += c.clock_jump;
    for (const auto& c : fine.cells) jumps_f += c.clock_jump;
    REQUIRE(jumps_c == jumps_f);
  }
}

TEST_CASE("config serialization round-trips random entries") {
  Rng rng(8);
  for (int k = 0; k < 30; ++k) {
    ExperimentConfig cfg;
    cfg.set("model.name", "pendulum");
    cfg.set("subordinator.beta", std::to_string(uniform(rng, 0.1, 0.9)));
    cfg.set("subordinator.c", std::to_string(uniform(rng, 0.1, 5.0)));
    cfg.set("run.seed", std::to_string(static_cast<std::uint64_t>(uniform(rng, 0, 1e9))));
    cfg.set("experiment.eps_grid", "0.1, 0.2, 0.4");
    const auto again = ExperimentConfig::parse(cfg.serialize());
    REQUIRE(again.entries() == cfg.entries());
    REQUIRE(again.hash() == cfg.hash());
  }
}
