#include "subsde/sde_flow.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>
#include <stdexcept>

namespace subsde {

namespace {

Mat diag2(double a, double b) {
  Mat m = Mat::Zero(2, 2);
  m(0, 0) = a;
  m(1, 1) = b;
  return m;
}

double inf_norm(const Mat& m) {
  return m.cwiseAbs().rowwise().sum().maxCoeff();
}

void check_square(const Mat& m, int d, const char* what) {
  if (m.rows() != d || m.cols() != d) {
    throw std::invalid_argument(std::string(what) + " must be a square matrix of the model dimension");
  }
}

}  // namespace

SdeModel zero_drift_model(const Mat& a) {
  const int d = static_cast<int>(a.rows());
  if (d < 1 || d > kMaxDim) throw std::invalid_argument("dimension out of range");
  check_square(a, d, "A");
  SdeModel m;
  m.name = "zero-drift";
  m.d = d;
  m.drift = [d](const Vec&) { return Vec(Vec::Zero(d)); };
  m.jacobian = [d](const Vec&) { return Mat(Mat::Zero(d, d)); };
  m.jacobian_derivative = [d](const Vec&, const Vec&) { return Mat(Mat::Zero(d, d)); };
  m.a = a;
  m.lipschitz_bound = 0.0;
  return m;
}

SdeModel linear_model(const Mat& b, const Mat& a) {
  const int d = static_cast<int>(b.rows());
  if (d < 1 || d > kMaxDim) throw std::invalid_argument("dimension out of range");
  check_square(b, d, "B");
  check_square(a, d, "A");
  SdeModel m;
  m.name = "linear";
  m.d = d;
  m.drift = [b](const Vec& x) { return Vec(b * x); };
  m.jacobian = [b](const Vec&) { return b; };
  m.jacobian_derivative = [d](const Vec&, const Vec&) { return Mat(Mat::Zero(d, d)); };
  m.a = a;
  m.lipschitz_bound = inf_norm(b);
  return m;
}

SdeModel kinetic_linear_model() {
  Mat b = Mat::Zero(2, 2);
  b(0, 1) = 1.0;
  SdeModel m = linear_model(b, diag2(0.0, 1.0));
  m.name = "kinetic-linear";
  return m;
}

SdeModel pendulum_model() {
  SdeModel m;
  m.name = "pendulum";
  m.d = 2;
  m.drift = [](const Vec& x) {
    Vec out(2);
    out << x[1], std::sin(x[0]);
    return out;
  };
  m.jacobian = [](const Vec& x) {
    Mat g = Mat::Zero(2, 2);
    g(0, 1) = 1.0;
    g(1, 0) = std::cos(x[0]);
    return g;
  };
  m.jacobian_derivative = [](const Vec& x, const Vec& v) {
    Mat g = Mat::Zero(2, 2);
    g(1, 0) = -std::sin(x[0]) * v[0];
    return g;
  };
  m.a = diag2(0.0, 1.0);
  m.lipschitz_bound = 1.0;
  return m;
}

SdeModel hamiltonian_model(const Hamiltonian& h, const Mat& a_v) {
  const int n = h.d;
  if (n < 1 || 2 * n > kMaxDim) throw std::invalid_argument("Hamiltonian dimension out of range");
  if (!h.gradient) throw std::invalid_argument("Hamiltonian needs a gradient evaluator");
  if (a_v.rows() != n || a_v.cols() != n) {
    throw std::invalid_argument("velocity noise matrix does not match the Hamiltonian split");
  }
  SdeModel m;
  m.name = "hamiltonian";
  m.d = 2 * n;
  m.drift = [h, n](const Vec& z) {
    const Vec g = h.gradient(z.head(n), z.tail(n));
    Vec out(2 * n);
    out.head(n) = g.tail(n);
    out.tail(n) = -g.head(n);
    return out;
  };
  // Hessian blocks [[Hxx, Hxy], [Hyx, Hyy]] give grad b = [[Hyx, Hyy], [-Hxx, -Hxy]].
  std::function<Mat(const Vec&)> hessian;
  if (h.hessian) {
    hessian = [h, n](const Vec& z) { return h.hessian(z.head(n), z.tail(n)); };
  } else {
    hessian = [h, n](const Vec& z) {
      Mat hs(2 * n, 2 * n);
      for (int k = 0; k < 2 * n; ++k) {
        const double step = 1e-5 * (1.0 + std::abs(z[k]));
        Vec zp = z;
        Vec zm = z;
        zp[k] += step;
        zm[k] -= step;
        hs.col(k) = (h.gradient(zp.head(n), zp.tail(n)) - h.gradient(zm.head(n), zm.tail(n))) / (2.0 * step);
      }
      return Mat(0.5 * (hs + hs.transpose()));
    };
  }
  m.jacobian = [hessian, n](const Vec& z) {
    const Mat hs = hessian(z);
    Mat g(2 * n, 2 * n);
    g.topRows(n) = hs.bottomRows(n);
    g.bottomRows(n) = -hs.topRows(n);
    return g;
  };
  Mat a = Mat::Zero(2 * n, 2 * n);
  a.bottomRightCorner(n, n) = a_v;
  m.a = a;
  return m;
}

void validate_model(const SdeModel& model, Rng& rng, int probes) {
  if (!model.drift || !model.jacobian) throw std::invalid_argument("model lacks drift or Jacobian");
  check_square(model.a, model.d, "A");
  std::normal_distribution<double> normal(0.0, 1.0);
  const double step = 1e-4;
  for (int p = 0; p < probes; ++p) {
    Vec x(model.d);
    for (int i = 0; i < model.d; ++i) x[i] = normal(rng);
    const Mat analytic = model.jacobian(x);
    Mat fd(model.d, model.d);
    for (int k = 0; k < model.d; ++k) {
      Vec xp = x;
      Vec xm = x;
      xp[k] += step;
      xm[k] -= step;
      fd.col(k) = (model.drift(xp) - model.drift(xm)) / (2.0 * step);
    }
    const double err = (fd - analytic).norm() / std::max(1.0, analytic.norm());
    if (err > 1e-5) {
      throw std::invalid_argument("Jacobian of model '" + model.name + "' disagrees with finite differences");
    }
  }
}

std::size_t TrajectoryBundle::index_of(double t) const {
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (std::abs(times[i] - t) <= 1e-12 * std::max(1.0, std::abs(t))) return i;
  }
  throw std::invalid_argument("time is not a grid point of the trajectory");
}

namespace {

struct FlowState {
  Vec x;
  Mat j;
  Mat k;
  double trace = 0.0;
};

// One RK4 step of dX = b dt, dJ = grad b J dt, dK = -K grad b dt, d tau = tr grad b dt.
void rk4_full(const SdeModel& model, FlowState& s, double h) {
  auto rhs = [&](const Vec& x, const Mat& j, const Mat& k, Vec& dx, Mat& dj, Mat& dk, double& dtr) {
    const Mat g = model.jacobian(x);
    dx = model.drift(x);
    dj.noalias() = g * j;
    dk.noalias() = -k * g;
    dtr = g.trace();
  };
  Vec dx1, dx2, dx3, dx4;
  Mat dj1, dj2, dj3, dj4, dk1, dk2, dk3, dk4;
  double t1, t2, t3, t4;
  rhs(s.x, s.j, s.k, dx1, dj1, dk1, t1);
  rhs(s.x + 0.5 * h * dx1, s.j + 0.5 * h * dj1, s.k + 0.5 * h * dk1, dx2, dj2, dk2, t2);
  rhs(s.x + 0.5 * h * dx2, s.j + 0.5 * h * dj2, s.k + 0.5 * h * dk2, dx3, dj3, dk3, t3);
  rhs(s.x + h * dx3, s.j + h * dj3, s.k + h * dk3, dx4, dj4, dk4, t4);
  const double w = h / 6.0;
  s.x += w * (dx1 + 2.0 * dx2 + 2.0 * dx3 + dx4);
  s.j += w * (dj1 + 2.0 * dj2 + 2.0 * dj3 + dj4);
  s.k += w * (dk1 + 2.0 * dk2 + 2.0 * dk3 + dk4);
  s.trace += w * (t1 + 2.0 * t2 + 2.0 * t3 + t4);
}

void rk4_state(const SdeModel& model, Vec& x, double h) {
  const Vec k1 = model.drift(x);
  const Vec k2 = model.drift(x + 0.5 * h * k1);
  const Vec k3 = model.drift(x + 0.5 * h * k2);
  const Vec k4 = model.drift(x + h * k3);
  x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

void check_inputs(const SdeModel& model, const DrivingNoisePath& noise, const Vec& x0) {
  if (noise.d != model.d) throw std::invalid_argument("noise dimension differs from model dimension");
  if (x0.size() != model.d) throw std::invalid_argument("initial state has wrong dimension");
}

}  // namespace

TrajectoryBundle integrate(const SdeModel& model, const DrivingNoisePath& noise, const Vec& x0) {
  check_inputs(model, noise, x0);
  const std::size_t n = noise.cells.size() + 1;
  TrajectoryBundle out;
  out.times.reserve(n);
  out.x.reserve(n);
  out.x_minus.reserve(n);
  out.j.reserve(n);
  out.k.reserve(n);
  out.trace_integral.reserve(n);

  FlowState s{x0, Mat::Identity(model.d, model.d), Mat::Identity(model.d, model.d), 0.0};
  const double lip_limit = 10.0 * model.lipschitz_bound;
  bool warned = false;
  auto probe_lipschitz = [&](const Vec& x) {
    if (warned || !std::isfinite(lip_limit)) return;
    if (inf_norm(model.jacobian(x)) > lip_limit) {
      out.warnings.push_back("declared Lipschitz bound exceeded more than tenfold");
      warned = true;
    }
  };
  probe_lipschitz(x0);

  out.times.push_back(noise.start);
  out.x.push_back(s.x);
  out.x_minus.push_back(s.x);
  out.j.push_back(s.j);
  out.k.push_back(s.k);
  out.trace_integral.push_back(0.0);

  for (const auto& cell : noise.cells) {
    if (!(cell.dt >= 0.0)) throw std::runtime_error("step-size underflow: non-increasing noise grid");
    if (cell.dt > 0.0) rk4_full(model, s, cell.dt);
    out.x_minus.push_back(s.x);
    const Vec dl = cell.increment();
    const Vec disp = model.a * dl;
    s.x = out.x_minus.back() + disp;
    if (cell.jump) {
      out.jump_log.push_back({out.times.size(), cell.t_end, dl, cell.clock_jump, disp});
    }
    out.times.push_back(cell.t_end);
    out.x.push_back(s.x);
    out.j.push_back(s.j);
    out.k.push_back(s.k);
    out.trace_integral.push_back(s.trace);
    probe_lipschitz(s.x);
  }
  return out;
}

Vec advance(const SdeModel& model, const DrivingNoisePath& noise, const Vec& x0,
            const std::function<void(const NoiseCell&, const Vec&)>& on_cell) {
  check_inputs(model, noise, x0);
  Vec x = x0;
  for (const auto& cell : noise.cells) {
    if (!(cell.dt >= 0.0)) throw std::runtime_error("step-size underflow: non-increasing noise grid");
    if (cell.dt > 0.0) rk4_state(model, x, cell.dt);
    x += model.a * (cell.dl_cont + cell.dl_jump);
    if (on_cell) on_cell(cell, x);
  }
  return x;
}

double ito_product_residual(const SdeModel& model, const TrajectoryBundle& bundle, const MatrixField& v) {
  if (!v.value || !v.directional) throw std::invalid_argument("matrix field needs value and derivative");
  const std::size_t n = bundle.times.size();
  const Mat v0 = v.value(bundle.x.front());
  auto integrand = [&](const Mat& k, const Vec& x) {
    return Mat(k * (v.directional(x, model.drift(x)) - model.jacobian(x) * v.value(x)));
  };
  Mat accumulated = Mat::Zero(v0.rows(), v0.cols());
  double worst = 0.0;
  for (std::size_t i = 1; i < n; ++i) {
    const double h = bundle.times[i] - bundle.times[i - 1];
    // On the open cell X runs from x[i-1] to x_minus[i] without jumps.
    accumulated += 0.5 * h * (integrand(bundle.k[i - 1], bundle.x[i - 1]) + integrand(bundle.k[i], bundle.x_minus[i]));
    accumulated += bundle.k[i] * (v.value(bundle.x[i]) - v.value(bundle.x_minus[i]));
    const Mat residual = bundle.k[i] * v.value(bundle.x[i]) - v0 - accumulated;
    worst = std::max(worst, residual.norm());
  }
  return worst;
}

double inverse_flow_residual(const TrajectoryBundle& bundle) {
  double worst = 0.0;
  for (std::size_t i = 0; i < bundle.j.size(); ++i) {
    const Mat jk = bundle.j[i] * bundle.k[i];
    worst = std::max(worst, (jk - Mat::Identity(jk.rows(), jk.cols())).norm());
  }
  return worst;
}

double liouville_residual(const TrajectoryBundle& bundle) {
  double worst = 0.0;
  for (std::size_t i = 0; i < bundle.j.size(); ++i) {
    worst = std::max(worst, std::abs(std::log(bundle.j[i].determinant()) - bundle.trace_integral[i]));
  }
  return worst;
}

void write_bundle_csv(std::ostream& os, const TrajectoryBundle& bundle, bool with_jacobians) {
  const int d = bundle.x.empty() ? 0 : static_cast<int>(bundle.x.front().size());
  os << "t";
  for (int i = 0; i < d; ++i) os << ",X_" << (i + 1);
  if (with_jacobians) {
    for (int c = 0; c < d; ++c)
      for (int r = 0; r < d; ++r) os << ",J_" << (r + 1) << (c + 1);
    for (int c = 0; c < d; ++c)
      for (int r = 0; r < d; ++r) os << ",K_" << (r + 1) << (c + 1);
  }
  os << '\n' << std::setprecision(17);
  for (std::size_t k = 0; k < bundle.times.size(); ++k) {
    os << bundle.times[k];
    for (int i = 0; i < d; ++i) os << ',' << bundle.x[k][i];
    if (with_jacobians) {
      for (int c = 0; c < d; ++c)
        for (int r = 0; r < d; ++r) os << ',' << bundle.j[k](r, c);
      for (int c = 0; c < d; ++c)
        for (int r = 0; r < d; ++r) os << ',' << bundle.k[k](r, c);
    }
    os << '\n';
  }
}

}  // namespace subsde
