#include "subsde/stats_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <stdexcept>

#include "subsde/parallel.hpp"

namespace subsde {

SampleEnsemble simulate_ensemble(const SdeModel& model, const SubordinatorSpec& spec, const Vec& x0, double t,
                                 std::size_t n, std::uint64_t seed, const EnsembleOptions& options) {
  if (n < 1) throw std::invalid_argument("ensemble needs at least one path");
  if (!(t > 0.0)) throw std::invalid_argument("time must be positive");
  const double dt_max = options.dt_max > 0.0 ? options.dt_max : t / 100.0;
  SampleEnsemble out;
  out.samples.resize(n);
  parallel_for(n, options.threads, [&](std::size_t i) {
    Rng rng = make_stream(seed, i);
    const SubordinatorPath clock = sample_path(spec, t, options.eps, rng);
    out.samples[i] = advance(model, synthesize_noise(clock, model.d, dt_max, rng), x0);
  });
  out.meta = {model.name, spec.label(), t, seed, n, options.eps};
  return out;
}

CfEstimate empirical_cf(const SampleEnsemble& ensemble, const Vec& z) {
  const auto& xs = ensemble.samples;
  if (xs.empty()) return {};
  double sc = 0.0, ss = 0.0, sc2 = 0.0, ss2 = 0.0;
  for (const auto& x : xs) {
    const double phase = z.dot(x);
    const double c = std::cos(phase);
    const double s = std::sin(phase);
    sc += c;
    ss += s;
    sc2 += c * c;
    ss2 += s * s;
  }
  const double n = static_cast<double>(xs.size());
  const double mc = sc / n;
  const double ms = ss / n;
  const double var = std::max(0.0, sc2 / n - mc * mc) + std::max(0.0, ss2 / n - ms * ms);
  return {{mc, ms}, std::sqrt(var / n)};
}

std::vector<double> silverman_bandwidth(const SampleEnsemble& ensemble) {
  const auto& xs = ensemble.samples;
  if (xs.empty()) throw std::invalid_argument("empty ensemble");
  const int d = static_cast<int>(xs.front().size());
  const double n = static_cast<double>(xs.size());
  const double factor = std::pow(4.0 / ((d + 2) * n), 1.0 / (d + 4));
  std::vector<double> h(d);
  std::vector<double> col(xs.size());
  for (int j = 0; j < d; ++j) {
    for (std::size_t i = 0; i < xs.size(); ++i) col[i] = xs[i][j];
    auto mid = col.begin() + static_cast<std::ptrdiff_t>(col.size() / 2);
    std::nth_element(col.begin(), mid, col.end());
    const double median = *mid;
    for (auto& v : col) v = std::abs(v - median);
    std::nth_element(col.begin(), mid, col.end());
    const double scale = *mid / 0.6744897501960817;
    h[j] = (scale > 0.0 ? scale : 1.0) * factor;
  }
  return h;
}

KdeResult kde_density(const SampleEnsemble& ensemble, const KdeGrid& grid, const std::vector<double>& bandwidth) {
  const auto& axes = grid.axes;
  if (axes.empty()) throw std::invalid_argument("empty grid");
  for (const auto& ax : axes) {
    if (ax.empty()) throw std::invalid_argument("empty grid");
  }
  const std::size_t d = axes.size();
  if (bandwidth.size() != d) throw std::invalid_argument("bandwidth has wrong dimension");
  for (double h : bandwidth) {
    if (!(h > 0.0)) throw std::invalid_argument("bandwidth must be positive");
  }
  std::vector<std::size_t> stride(d, 1);
  for (std::size_t j = d - 1; j > 0; --j) stride[j - 1] = stride[j] * axes[j].size();
  KdeResult out;
  out.grid = grid;
  out.values.assign(stride[0] * axes[0].size(), 0.0);
  if (ensemble.samples.empty()) return out;

  const double norm = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  std::vector<std::vector<double>> weights(d);
  std::vector<std::size_t> lo(d), hi(d), idx(d);
  for (const auto& x : ensemble.samples) {
    if (static_cast<std::size_t>(x.size()) != d) throw std::invalid_argument("sample has wrong dimension");
    bool empty = false;
    for (std::size_t j = 0; j < d; ++j) {
      const auto& ax = axes[j];
      const double h = bandwidth[j];
      weights[j].assign(ax.size(), 0.0);
      lo[j] = ax.size();
      hi[j] = 0;
      for (std::size_t g = 0; g < ax.size(); ++g) {
        const double u = (ax[g] - x[static_cast<Eigen::Index>(j)]) / h;
        if (std::abs(u) > 8.0) continue;
        weights[j][g] = norm * std::exp(-0.5 * u * u) / h;
        lo[j] = std::min(lo[j], g);
        hi[j] = g + 1;
      }
      if (lo[j] >= hi[j]) empty = true;
    }
    if (empty) continue;
    idx = lo;
    while (true) {
      double w = 1.0;
      std::size_t flat = 0;
      for (std::size_t j = 0; j < d; ++j) {
        w *= weights[j][idx[j]];
        flat += idx[j] * stride[j];
      }
      out.values[flat] += w;
      std::size_t j = d;
      while (j > 0) {
        --j;
        if (++idx[j] < hi[j]) break;
        idx[j] = lo[j];
        if (j == 0) {
          j = d + 1;
          break;
        }
      }
      if (j == d + 1) break;
    }
  }
  const double n = static_cast<double>(ensemble.samples.size());
  double cell = 1.0;
  for (const auto& ax : axes) cell *= ax.size() > 1 ? (ax.back() - ax.front()) / static_cast<double>(ax.size() - 1) : 1.0;
  double total = 0.0;
  for (auto& v : out.values) {
    v /= n;
    total += v;
  }
  out.mass = total * cell;
  return out;
}

TestFunction TestFunction::constant(double c) {
  TestFunction f;
  f.terms_.push_back({Kind::constant, c, Vec(), 0.0, 1.0});
  return f;
}

TestFunction TestFunction::linear(const Vec& g) {
  TestFunction f;
  f.terms_.push_back({Kind::linear, 1.0, g, 0.0, 1.0});
  return f;
}

TestFunction TestFunction::cosine(const Vec& z, double phase, double weight) {
  TestFunction f;
  f.terms_.push_back({Kind::cosine, weight, z, phase, 1.0});
  return f;
}

TestFunction TestFunction::gaussian_bump(const Vec& center, double width, double weight) {
  if (!(width > 0.0)) throw std::invalid_argument("bump width must be positive");
  TestFunction f;
  f.terms_.push_back({Kind::bump, weight, center, 0.0, width});
  return f;
}

TestFunction TestFunction::operator+(const TestFunction& other) const {
  TestFunction f = *this;
  f.terms_.insert(f.terms_.end(), other.terms_.begin(), other.terms_.end());
  return f;
}

TestFunction TestFunction::operator*(double k) const {
  TestFunction f = *this;
  for (auto& t : f.terms_) t.weight *= k;
  return f;
}

double TestFunction::value(const Vec& y) const {
  double sum = 0.0;
  for (const auto& t : terms_) {
    switch (t.kind) {
      case Kind::constant: sum += t.weight; break;
      case Kind::linear: sum += t.weight * t.v.dot(y); break;
      case Kind::cosine: sum += t.weight * std::cos(t.v.dot(y) + t.phase); break;
      case Kind::bump: sum += t.weight * std::exp(-(y - t.v).squaredNorm() / (2.0 * t.width * t.width)); break;
    }
  }
  return sum;
}

Vec TestFunction::gradient(const Vec& y) const {
  Vec g = Vec::Zero(y.size());
  for (const auto& t : terms_) {
    switch (t.kind) {
      case Kind::constant: break;
      case Kind::linear: g += t.weight * t.v; break;
      case Kind::cosine: g -= t.weight * std::sin(t.v.dot(y) + t.phase) * t.v; break;
      case Kind::bump: {
        const double w2 = t.width * t.width;
        g -= t.weight * std::exp(-(y - t.v).squaredNorm() / (2.0 * w2)) / w2 * (y - t.v);
        break;
      }
    }
  }
  return g;
}

double TestFunction::smoothed(const Vec& y, const Mat& a, double s) const {
  return value(y) + smoothed_increment(y, a, s);
}

double TestFunction::smoothed_increment(const Vec& y, const Mat& a, double s) const {
  double sum = 0.0;
  for (const auto& t : terms_) {
    switch (t.kind) {
      case Kind::constant:
      case Kind::linear: break;
      case Kind::cosine: {
        const double q = (a.transpose() * t.v).squaredNorm();
        sum += t.weight * std::cos(t.v.dot(y) + t.phase) * std::expm1(-0.5 * s * q);
        break;
      }
      case Kind::bump: {
        // Log-ratio of the smoothed bump to the bump, in the eigenbasis of A A^T.
        const double w2 = t.width * t.width;
        const Eigen::SelfAdjointEigenSolver<Mat> eig(a * a.transpose());
        const Vec r = eig.eigenvectors().transpose() * (y - t.v);
        double log_ratio = 0.0;
        for (Eigen::Index i = 0; i < r.size(); ++i) {
          const double lam = std::max(0.0, eig.eigenvalues()[i]);
          log_ratio += -0.5 * std::log1p(s * lam / w2) + 0.5 * s * lam * r[i] * r[i] / (w2 * (w2 + s * lam));
        }
        const double log_base = -(y - t.v).squaredNorm() / (2.0 * w2);
        const double base = std::exp(log_base);
        // Far from the center base underflows while expm1 would overflow.
        const double inc = log_ratio < 1.0 ? base * std::expm1(log_ratio) : std::exp(log_base + log_ratio) - base;
        sum += t.weight * inc;
        break;
      }
    }
  }
  return sum;
}

double TestFunction::fourth_order_bound(const Mat& a) const {
  const Mat m = a * a.transpose();
  double bound = 0.0;
  for (const auto& t : terms_) {
    if (t.kind == Kind::cosine) {
      const double q = t.v.dot(m * t.v);
      bound += std::abs(t.weight) * q * q;
    } else if (t.kind == Kind::bump) {
      const double d = static_cast<double>(m.rows());
      const double norm = Eigen::MatrixXd(m).operatorNorm();
      bound += std::abs(t.weight) * norm * norm * (d * d + 2.0 * d) / std::pow(t.width, 4);
    }
  }
  return bound;
}

namespace {

double jump_part(const SdeModel& model, const SubordinatorSpec& spec, const TestFunction& f, const Vec& y,
                 double tol) {
  GaussianSmoothed g;
  g.average = [&](double s) { return f.smoothed_increment(y, model.a, s); };
  g.limit = g.average(1e14);
  return levy_quadrature(spec, g, tol);
}

}  // namespace

double generator_apply(const SdeModel& model, const SubordinatorSpec& spec, const TestFunction& f, const Vec& y) {
  if (y.size() != model.d) throw std::invalid_argument("point has wrong dimension");
  return jump_part(model, spec, f, y, 1e-12) + model.drift(y).dot(f.gradient(y));
}

FpReport fokker_planck_residual(const SdeModel& model, const SubordinatorSpec& spec, const TestFunction& f,
                                const Vec& x0, double t, double dt, std::size_t n, std::uint64_t seed,
                                const FpOptions& options) {
  if (!(dt > 0.0) || !(2.0 * dt < t)) throw std::invalid_argument("need 0 < 2 dt < t");
  if (n < 2 || options.branches < 1) throw std::invalid_argument("need at least two paths and one branch");
  const double outer_dt = options.dt_max > 0.0 ? options.dt_max : std::min(dt, t / 100.0);
  const double window_dt = std::min(outer_dt, 0.5 * dt);
  const double marks[] = {dt, 2.0 * dt, 3.0 * dt};
  const std::size_t m = options.branches;

  std::vector<double> q(n), d1(n), d2(n), gen(n);
  parallel_for(n, options.threads, [&](std::size_t i) {
    Rng rng = make_stream(seed, i);
    const SubordinatorPath head = sample_path(spec, t - 2.0 * dt, options.eps, rng);
    const Vec y0 = advance(model, synthesize_noise(head, model.d, outer_dt, rng), x0);
    const double f0 = f.value(y0);
    double sum1 = 0.0, sum2 = 0.0;
    Vec x_mid = y0;
    for (std::size_t b = 0; b < m; ++b) {
      const SubordinatorPath window = sample_path(spec, 4.0 * dt, options.eps, rng);
      const DrivingNoisePath noise = synthesize_noise(window, model.d, window_dt, rng, marks);
      double f1 = 0.0, f3 = 0.0;
      const Vec x4 = advance(model, noise, y0, [&](const NoiseCell& cell, const Vec& x) {
        if (cell.t_end == marks[0]) f1 = f.value(x);
        if (cell.t_end == marks[1] && b == 0) x_mid = x;
        if (cell.t_end == marks[2]) f3 = f.value(x);
      });
      sum1 += (f3 - f1) / (2.0 * dt);
      sum2 += (f.value(x4) - f0) / (4.0 * dt);
    }
    d1[i] = sum1 / static_cast<double>(m);
    d2[i] = sum2 / static_cast<double>(m);
    gen[i] = jump_part(model, spec, f, x_mid, 1e-9) + model.drift(x_mid).dot(f.gradient(x_mid));
    q[i] = d1[i] - gen[i];
  });

  const double nn = static_cast<double>(n);
  double mq = 0.0, m1 = 0.0, m2 = 0.0, mg = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mq += q[i];
    m1 += d1[i];
    m2 += d2[i];
    mg += gen[i];
  }
  mq /= nn;
  m1 /= nn;
  m2 /= nn;
  mg /= nn;
  double var = 0.0;
  for (double v : q) var += (v - mq) * (v - mq);
  var /= nn - 1.0;

  FpReport r;
  r.lhs = m1;
  r.rhs = mg;
  r.residual = std::abs(mq);
  r.sigma = std::sqrt(var / nn);
  r.time_error = std::abs(m2 - m1) / 3.0;
  r.bias = spec.truncated_second_moment(options.eps) * f.fourth_order_bound(model.a) / 8.0;
  r.budget = 3.0 * r.sigma + r.time_error + 2.0 * r.bias;
  r.pass = r.residual <= r.budget;
  return r;
}

void write_cf_csv(std::ostream& os, const std::vector<Vec>& z, const std::vector<CfEstimate>& cf) {
  const int d = z.empty() ? 0 : static_cast<int>(z.front().size());
  for (int i = 0; i < d; ++i) os << "z_" << (i + 1) << ',';
  os << "re_cf,im_cf,se\n" << std::setprecision(17);
  for (std::size_t k = 0; k < z.size() && k < cf.size(); ++k) {
    for (int i = 0; i < d; ++i) os << z[k][i] << ',';
    os << cf[k].value.real() << ',' << cf[k].value.imag() << ',' << cf[k].se << '\n';
  }
}

void write_kde_csv(std::ostream& os, const KdeResult& kde) {
  const auto& axes = kde.grid.axes;
  const std::size_t d = axes.size();
  for (std::size_t j = 0; j < d; ++j) os << "x_" << (j + 1) << ',';
  os << "density\n" << std::setprecision(17);
  std::vector<std::size_t> idx(d, 0);
  for (double v : kde.values) {
    for (std::size_t j = 0; j < d; ++j) os << axes[j][idx[j]] << ',';
    os << v << '\n';
    for (std::size_t j = d; j-- > 0;) {
      if (++idx[j] < axes[j].size()) break;
      idx[j] = 0;
    }
  }
}

void write_residual_csv(std::ostream& os, const std::vector<std::string>& ids, const std::vector<FpReport>& reports) {
  os << "test_id,residual,budget,lhs,rhs,sigma,time_error,bias,pass\n" << std::setprecision(17);
  for (std::size_t k = 0; k < ids.size() && k < reports.size(); ++k) {
    const auto& r = reports[k];
    os << ids[k] << ',' << r.residual << ',' << r.budget << ',' << r.lhs << ',' << r.rhs << ',' << r.sigma << ','
       << r.time_error << ',' << r.bias << ',' << (r.pass ? "pass" : "fail") << '\n';
  }
}

}  // namespace subsde
