#include <cmath>
#include <sstream>

#include "doctest.h"
#include "subsde/linalg.hpp"
#include "subsde/sde_flow.hpp"

using namespace subsde;

namespace {

DrivingNoisePath quiet_noise(double horizon, int d, double dt) {
  SubordinatorPath still;
  still.horizon = horizon;
  Rng rng(0);
  return synthesize_noise(still, d, dt, rng);
}

DrivingNoisePath pendulum_noise(std::uint64_t seed, double dt) {
  Rng rng = make_stream(seed, 0);
  const auto clock = sample_path(make_stable_spec(0.5, 1.0), 1.0, 1e-3, rng);
  return synthesize_noise(clock, 2, dt, rng);
}

}  // namespace

TEST_CASE("noise-free linear flow equals the matrix exponential") {
  Mat b(2, 2);
  b << -0.3, 1.0, -1.0, -0.1;
  const auto model = linear_model(b, Mat::Identity(2, 2));
  Vec x0(2);
  x0 << 1.0, -0.5;
  const auto bundle = integrate(model, quiet_noise(2.0, 2, 0.01), x0);
  const Eigen::MatrixXd e = expm(2.0 * Eigen::MatrixXd(b));
  CHECK((Eigen::VectorXd(bundle.x.back()) - e * Eigen::VectorXd(x0)).norm() < 1e-9);
  CHECK((Eigen::MatrixXd(bundle.j.back()) - e).norm() < 1e-9);
  CHECK((Eigen::MatrixXd(bundle.k.back()) - e.inverse()).norm() < 1e-9);
  CHECK(bundle.trace_integral.back() == doctest::Approx(-0.8).epsilon(1e-12));
}

TEST_CASE("jumps are additive and leave the Jacobian continuous") {
  const auto model = pendulum_model();
  Vec x0(2);
  x0 << 0.5, 0.0;
  const auto noise = pendulum_noise(21, 0.01);
  const auto bundle = integrate(model, noise, x0);
  REQUIRE(bundle.x.size() == bundle.times.size());
  for (std::size_t k = 1; k < bundle.x.size(); ++k) {
    const Vec jump = model.a * noise.cells[k - 1].increment();
    CHECK(bundle.x[k] == bundle.x_minus[k] + jump);
  }
  for (const auto& rec : bundle.jump_log) {
    CHECK(bundle.times[rec.index] == rec.time);
    CHECK((rec.displacement - model.a * rec.dl).norm() == 0.0);
  }
  CHECK(bundle.index_of(bundle.times[3]) == 3);
  CHECK_THROWS(bundle.index_of(0.123456789));
}

TEST_CASE("state-only advance matches the full integrator") {
  const auto model = pendulum_model();
  Vec x0(2);
  x0 << 0.5, 0.0;
  const auto noise = pendulum_noise(22, 0.01);
  int seen = 0;
  const Vec end = advance(model, noise, x0, [&](const NoiseCell&, const Vec&) { ++seen; });
  CHECK(seen == static_cast<int>(noise.cells.size()));
  CHECK((end - integrate(model, noise, x0).x.back()).norm() < 1e-13);
}

TEST_CASE("flow identities on a pendulum path") {
  const auto model = pendulum_model();
  Vec x0(2);
  x0 << 0.5, 0.0;
  const auto bundle = integrate(model, pendulum_noise(23, 0.005), x0);
  CHECK(inverse_flow_residual(bundle) < 1e-6);
  CHECK(liouville_residual(bundle) < 1e-6);
}

TEST_CASE("product rule residual shrinks at second order") {
  const auto model = pendulum_model();
  Vec x0(2);
  x0 << 0.5, 0.0;
  const MatrixField field{model.jacobian, model.jacobian_derivative};
  Rng rng(24);
  const auto coarse = pendulum_noise(24, 0.02);
  const auto fine = refine(coarse, rng);
  const double r1 = ito_product_residual(model, integrate(model, coarse, x0), field);
  const double r2 = ito_product_residual(model, integrate(model, fine, x0), field);
  CHECK(r1 > 0.0);
  CHECK(r1 / r2 >= 1.9);
}

TEST_CASE("model validation catches a wrong Jacobian") {
  Rng rng(25);
  CHECK_NOTHROW(validate_model(pendulum_model(), rng));
  CHECK_NOTHROW(validate_model(kinetic_linear_model(), rng));
  auto broken = pendulum_model();
  broken.jacobian = [](const Vec&) { return Mat::Identity(2, 2); };
  CHECK_THROWS_AS(validate_model(broken, rng), std::invalid_argument);
}

TEST_CASE("hamiltonian drift is the symplectic gradient") {
  Hamiltonian h;
  h.d = 1;
  h.gradient = [](const Vec& x, const Vec& y) {
    Vec g(2);
    g << x[0], y[0];  // H = (x^2 + y^2) / 2
    return g;
  };
  const auto model = hamiltonian_model(h, Mat::Identity(1, 1));
  Vec z(2);
  z << 0.3, -0.7;
  const Vec f = model.drift(z);
  CHECK(f[0] == doctest::Approx(-0.7));
  CHECK(f[1] == doctest::Approx(-0.3));
  CHECK(model.a(0, 0) == 0.0);
  CHECK(model.a(1, 1) == 1.0);
  Rng rng(26);
  CHECK_NOTHROW(validate_model(model, rng));

  // Energy is conserved by the noise-free flow.
  const auto bundle = integrate(model, quiet_noise(3.0, 2, 0.01), z);
  CHECK(bundle.x.back().squaredNorm() == doctest::Approx(z.squaredNorm()).epsilon(1e-9));
}

TEST_CASE("bundle csv layout") {
  Vec x0(2);
  x0 << 0.0, 0.0;
  const auto bundle = integrate(kinetic_linear_model(), quiet_noise(0.1, 2, 0.05), x0);
  std::ostringstream a, b;
  write_bundle_csv(a, bundle, false);
  write_bundle_csv(b, bundle, true);
  CHECK(a.str().rfind("t,X_1,X_2\n", 0) == 0);
  CHECK(b.str().find("J_") != std::string::npos);
}
