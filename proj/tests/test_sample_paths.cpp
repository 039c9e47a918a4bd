#include <algorithm>
#include <cmath>
#include <sstream>

#include "doctest.h"
#include "subsde/sample_paths.hpp"

using namespace subsde;

namespace {

SubordinatorPath two_jump_path() {
  SubordinatorPath p;
  p.horizon = 1.0;
  p.jumps = {{0.333, 0.5}, {0.75, 0.25}};
  p.drift_rate = 0.1;
  p.cut = 1e-3;
  return p;
}

}  // namespace

TEST_CASE("noise grid holds the mesh, jump times and required times") {
  Rng rng(1);
  const std::vector<double> req = {0.42, 0.75};
  const auto noise = synthesize_noise(two_jump_path(), 2, 0.25, rng, req);
  const auto grid = noise.grid();
  CHECK(grid.front() == 0.0);
  CHECK(grid.back() == 1.0);
  for (double t : {0.25, 0.333, 0.42, 0.5, 0.75, 1.0}) {
    CHECK(std::count(grid.begin(), grid.end(), t) == 1);
  }
  int jumps = 0;
  for (const auto& c : noise.cells) {
    CHECK(c.dt > 0.0);
    CHECK(c.clock_drift == doctest::Approx(0.1 * c.dt));
    if (c.jump) {
      ++jumps;
      CHECK((c.t_end == 0.333 || c.t_end == 0.75));
    } else {
      CHECK(c.dl_jump.isZero(0.0));
    }
  }
  CHECK(jumps == 2);
}

TEST_CASE("noise grid honours the start offset") {
  Rng rng(2);
  const std::vector<double> req = {5.5};
  const auto noise = synthesize_noise(two_jump_path(), 1, 0.5, rng, req, 5.0);
  CHECK(noise.start == 5.0);
  CHECK(noise.horizon() == 6.0);
  const auto grid = noise.grid();
  CHECK(std::count(grid.begin(), grid.end(), 5.75) == 1);
}

TEST_CASE("refinement keeps the realization and doubles the cells") {
  Rng rng(3);
  const auto coarse = synthesize_noise(two_jump_path(), 2, 0.1, rng);
  const auto fine = refine(coarse, rng);
  REQUIRE(fine.cells.size() == 2 * coarse.cells.size());
  CHECK((fine.total() - coarse.total()).norm() < 1e-14);
  for (std::size_t k = 0; k < coarse.cells.size(); ++k) {
    const auto& l = fine.cells[2 * k];
    const auto& r = fine.cells[2 * k + 1];
    CHECK(r.t_end == coarse.cells[k].t_end);
    CHECK_FALSE(l.jump);
    CHECK(r.jump == coarse.cells[k].jump);
    CHECK((l.increment() + r.increment() - coarse.cells[k].increment()).norm() < 1e-14);
  }
}

TEST_CASE("continuous increments have variance equal to the clock drift") {
  SubordinatorPath p;
  p.horizon = 1.0;
  p.drift_rate = 2.0;
  Rng rng(4);
  const auto noise = synthesize_noise(p, 1, 1e-4, rng);
  double sq = 0.0;
  for (const auto& c : noise.cells) sq += c.dl_cont[0] * c.dl_cont[0] / c.clock_drift;
  const double mean = sq / static_cast<double>(noise.cells.size());
  CHECK(mean == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("input validation") {
  Rng rng(5);
  CHECK_THROWS_AS(synthesize_noise(two_jump_path(), 0, 0.1, rng), std::invalid_argument);
  CHECK_THROWS_AS(synthesize_noise(two_jump_path(), kMaxDim + 1, 0.1, rng), std::invalid_argument);
  CHECK_THROWS_AS(synthesize_noise(two_jump_path(), 1, 0.0, rng), std::invalid_argument);
}

TEST_CASE("terminal subordinated value has covariance S_T I") {
  SubordinatorPath p = two_jump_path();
  const double s = p.terminal();
  Rng rng(6);
  const int n = 100000;
  double sq = 0.0, cross = 0.0;
  for (int i = 0; i < n; ++i) {
    const Vec v = subordinated_terminal(p, 2, rng);
    sq += v[0] * v[0];
    cross += v[0] * v[1];
  }
  CHECK(sq / n == doctest::Approx(s).epsilon(0.02));
  CHECK(std::abs(cross / n) < 5.0 * s / std::sqrt(double(n)));
}

TEST_CASE("truncation bias formula") {
  const auto spec = make_stable_spec(0.5, 1.0);
  CHECK(truncation_cf_bias(spec, 1e-4, 2.0, 3.0) ==
        doctest::Approx(2.0 * 4.5 * spec.truncated_second_moment(1e-4)).epsilon(1e-14));
}

TEST_CASE("compound Poisson decomposition agrees in law") {
  const auto spec = make_stable_spec(0.5, 1.0);
  const Mat a = Mat::Identity(2, 2);
  std::vector<Vec> z;
  for (double r : {0.25, 0.5, 1.0}) {
    Vec v = Vec::Zero(2);
    v[0] = r;
    z.push_back(v);
  }
  const std::size_t n = 4000;
  const auto rep = verify_decomposition(spec, a, 1.0, z, n, 17);
  CHECK(rep.big_jump_rate == doctest::Approx(2.0));
  REQUIRE(rep.discrepancy.size() == z.size());
  CHECK(rep.max_discrepancy <= 8.0 / std::sqrt(double(n)));
  // Full route against exp(-c_L |z|), c_L = sqrt(2 pi) at beta = 1/2.
  for (std::size_t k = 0; k < z.size(); ++k) {
    const double exact = std::exp(-std::sqrt(2.0 * M_PI) * z[k][0]);
    CHECK(std::abs(rep.cf_full[k] - exact) <= 4.0 / std::sqrt(double(n)));
  }
  CHECK_THROWS_AS(verify_decomposition(spec, a, 1.0, z, 10, 1), std::invalid_argument);
}

TEST_CASE("noise csv layout") {
  Rng rng(8);
  std::ostringstream os;
  write_noise_csv(os, synthesize_noise(two_jump_path(), 2, 0.5, rng));
  const std::string s = os.str();
  CHECK(s.substr(0, s.find('\n')) == "time,dL_1,dL_2,jump_flag");
}
