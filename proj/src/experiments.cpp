#include "subsde/experiments.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "subsde/analytic_oracles.hpp"
#include "subsde/hormander.hpp"
#include "subsde/malliavin.hpp"
#include "subsde/parallel.hpp"
#include "subsde/stats_analysis.hpp"

namespace subsde {

namespace {

using Eigen::MatrixXd;
using Json = nlohmann::ordered_json;

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

std::vector<double> linspace(double lo, double hi, int n) {
  std::vector<double> v(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = n == 1 ? lo : lo + (hi - lo) * i / (n - 1);
  return v;
}

Vec to_vec(const std::vector<double>& v) {
  Vec x(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) x[static_cast<Eigen::Index>(i)] = v[i];
  return x;
}

// Collects checks and writes the outputs of one run.
class Run {
 public:
  Run(std::string name, std::string claim, const ExperimentConfig& cfg, std::string out_dir, std::ostream& log)
      : name_(std::move(name)), claim_(std::move(claim)), cfg_(cfg), out_dir_(std::move(out_dir)), log_(log) {
    std::filesystem::create_directories(out_dir_);
    report_["subcommand"] = name_;
    report_["claim"] = claim_;
    report_["config_hash"] = hex64(cfg_.hash());
    report_["seed"] = cfg_.seed();
    report_["threads"] = cfg_.threads();
    report_["checks"] = Json::array();
  }

  void csv(const std::string& suffix, const std::function<void(std::ostream&)>& body) {
    const std::string path = out_dir_ + "/" + name_ + suffix + ".csv";
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path);
    os << "# generated " << utc_now() << '\n';
    os << "# subcommand=" << name_ << " claim=" << claim_ << " config_hash=" << hex64(cfg_.hash())
       << " seed=" << cfg_.seed() << " threads=" << cfg_.threads() << '\n';
    body(os);
    log_ << "wrote " << path << '\n';
  }

  void check(const std::string& what, double value, double limit, bool pass) {
    report_["checks"].push_back({{"name", what}, {"value", value}, {"limit", limit}, {"pass", pass}});
    log_ << (pass ? "PASS " : "FAIL ") << what << ": value=" << std::setprecision(6) << value << " limit=" << limit
         << '\n';
    failed_ = failed_ || !pass;
  }

  Json& info() { return report_["info"]; }

  int finish() {
    report_["pass"] = !failed_;
    const std::string path = out_dir_ + "/" + name_ + ".json";
    std::ofstream os(path);
    os << report_.dump(2) << '\n';
    log_ << "wrote " << path << '\n';
    return failed_ ? kExitCheckFailed : kExitPass;
  }

 private:
  std::string name_;
  std::string claim_;
  const ExperimentConfig& cfg_;
  std::string out_dir_;
  std::ostream& log_;
  Json report_;
  bool failed_ = false;
};

MatrixXd linear_drift_matrix(const SdeModel& model) {
  const std::string& n = model.name;
  if (n != "zero-drift" && n != "linear" && n != "kinetic-linear") {
    throw ConfigError("invalid field model.name: this subcommand needs a linear model");
  }
  return MatrixXd(model.jacobian(Vec::Zero(model.d)));
}

std::vector<Vec> cf_grid(int d) {
  std::vector<Vec> grid;
  if (d == 1) {
    for (double r : linspace(-3.0, 3.0, 25)) grid.push_back(Vec::Constant(1, r));
  } else if (d == 2) {
    for (double u : linspace(-2.1, 2.1, 5))
      for (double v : linspace(-2.1, 2.1, 5)) {
        Vec z(2);
        z << u, v;
        grid.push_back(z);
      }
  } else {
    const auto radii = linspace(-3.0, 3.0, 25);
    for (std::size_t k = 0; k < radii.size(); ++k) {
      Vec z = Vec::Zero(d);
      z[static_cast<Eigen::Index>(k % static_cast<std::size_t>(d))] = radii[k];
      grid.push_back(z);
    }
  }
  return grid;
}

int ou_validate(const ExperimentConfig& cfg, const std::string& out, std::ostream& log) {
  Run run("ou-validate", "ou-characteristic-function", cfg, out, log);
  const SdeModel model = cfg.model();
  const SubordinatorSpec spec = cfg.spec();
  const MatrixXd b = linear_drift_matrix(model);
  const OuSystem sys = make_ou_system(b, MatrixXd(model.a), spec);
  const double t = cfg.horizon();
  const std::size_t n = cfg.paths(100000);
  const Vec x0 = cfg.x0();
  const SampleEnsemble ens = simulate_ensemble(model, spec, x0, t, n, cfg.seed(),
                                               {cfg.eps(), cfg.dt_max() > 0 ? cfg.dt_max() : t / 100.0, cfg.threads()});
  const Eigen::VectorXd mean_path = expm(t * b) * Eigen::VectorXd(x0);
  const auto grid = cf_grid(model.d);
  const double stat = 4.0 / std::sqrt(static_cast<double>(n));
  std::vector<double> s_grid = linspace(0.0, t, 101);
  const OuExponent exponent(sys, t);
  std::vector<CfEstimate> emp;
  std::vector<std::complex<double>> oracle;
  std::vector<double> err, budget;
  for (const auto& z : grid) {
    emp.push_back(empirical_cf(ens, z));
    const Eigen::VectorXd zz = z;
    oracle.push_back(std::polar(1.0, zz.dot(mean_path)) * std::exp(-sys.c_l * exponent(zz)));
    double q = 0.0;
    for (double s : s_grid) q = std::max(q, 0.5 * (sys.a.transpose() * expm(s * b.transpose()) * zz).squaredNorm());
    err.push_back(std::abs(emp.back().value - oracle.back()));
    budget.push_back(stat + truncation_cf_bias(spec, cfg.eps(), t, q));
  }
  run.csv("", [&](std::ostream& os) {
    for (int i = 0; i < model.d; ++i) os << "z_" << (i + 1) << ',';
    os << "re_empirical,im_empirical,se,re_oracle,im_oracle,abs_error,budget\n" << std::setprecision(17);
    for (std::size_t k = 0; k < grid.size(); ++k) {
      for (int i = 0; i < model.d; ++i) os << grid[k][i] << ',';
      os << emp[k].value.real() << ',' << emp[k].value.imag() << ',' << emp[k].se << ',' << oracle[k].real() << ','
         << oracle[k].imag() << ',' << err[k] << ',' << budget[k] << '\n';
    }
  });
  double worst_ratio = 0.0;
  double max_err = 0.0, max_budget = 0.0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    worst_ratio = std::max(worst_ratio, err[k] / budget[k]);
    max_err = std::max(max_err, err[k]);
    max_budget = std::max(max_budget, budget[k]);
  }
  run.info()["max_cf_error"] = max_err;
  run.info()["max_budget"] = max_budget;
  if (model.d <= 3) {
    const auto decay = ou_decay_rate(sys, t);
    run.info()["decay_rate"] = decay.rate;
    run.info()["degenerate"] = decay.degenerate;
    if (!decay.degenerate) {
      for (double m : {0.0, 2.0}) {
        const auto mi = smoothness_moment_integral(sys, t, m);
        run.info()["moment_" + std::to_string(static_cast<int>(m))] = {{"value", mi.value}, {"tail_bound", mi.tail_bound},
                                                                       {"radius", mi.radius}};
      }
    }
  }
  run.check("max |empirical CF - oracle CF| / budget", worst_ratio, 1.0, worst_ratio <= 1.0);
  return run.finish();
}

std::vector<Vec> sample_points(const ExperimentConfig& cfg, int d) {
  if (cfg.has("experiment.points")) {
    const auto flat = cfg.get_list("experiment.points", {});
    if (flat.empty() || flat.size() % static_cast<std::size_t>(d) != 0) {
      throw ConfigError("invalid field experiment.points: need a multiple of the dimension");
    }
    std::vector<Vec> pts;
    for (std::size_t k = 0; k < flat.size(); k += static_cast<std::size_t>(d)) {
      pts.push_back(to_vec(std::vector<double>(flat.begin() + static_cast<std::ptrdiff_t>(k),
                                               flat.begin() + static_cast<std::ptrdiff_t>(k) + d)));
    }
    return pts;
  }
  std::vector<Vec> pts;
  if (d <= 4) {
    const auto axis = d <= 2 ? linspace(-3.0, 3.0, 5) : linspace(-2.0, 2.0, 3);
    std::vector<std::size_t> idx(static_cast<std::size_t>(d), 0);
    while (true) {
      Vec x(d);
      for (int i = 0; i < d; ++i) x[i] = axis[idx[static_cast<std::size_t>(i)]];
      pts.push_back(x);
      int i = d - 1;
      while (i >= 0 && ++idx[static_cast<std::size_t>(i)] == axis.size()) idx[static_cast<std::size_t>(i--)] = 0;
      if (i < 0) break;
    }
  } else {
    Rng rng(cfg.seed());
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int k = 0; k < 20; ++k) {
      Vec x(d);
      for (int i = 0; i < d; ++i) x[i] = u(rng);
      pts.push_back(x);
    }
  }
  return pts;
}

int hormander_check(const ExperimentConfig& cfg, const std::string& out, std::ostream& log) {
  Run run("hormander-check", "hormander-rank", cfg, out, log);
  const SdeModel model = cfg.model();
  const int order = static_cast<int>(cfg.get_u64("experiment.order", static_cast<std::uint64_t>(std::max(model.d - 1, 1))));
  const double tol = cfg.get_double("experiment.tol", kRankTol);
  const auto points = sample_points(cfg, model.d);
  std::vector<RankRow> rows;
  std::size_t unstable = 0;
  for (const auto& x : points) {
    const auto hier = bracket_hierarchy(model, x, order);
    unstable += hier.unstable.size();
    for (const auto& w : hier.warnings) log << "warning: " << w << '\n';
    rows.push_back({x, numerical_rank(hier.stacked, tol)});
  }
  run.csv("", [&](std::ostream& os) { write_rank_csv(os, rows); });
  std::vector<double> uh;
  for (int n = 1; n <= std::max(order, 1); ++n) uh.push_back(uniform_hn_diagnostic(model, points, n));
  run.csv("_uniform", [&](std::ostream& os) {
    os << "order,constant\n" << std::setprecision(17);
    for (std::size_t k = 0; k < uh.size(); ++k) os << (k + 1) << ',' << uh[k] << '\n';
  });
  run.info()["uh1_constant"] = uh.front();
  run.info()["differencing_instabilities"] = unstable;
  if (model.name == "zero-drift" || model.name == "linear" || model.name == "kinetic-linear") {
    run.info()["kalman_rank"] = kalman_rank(linear_drift_matrix(model), MatrixXd(model.a), tol);
  }
  std::size_t passed = 0;
  for (const auto& r : rows) passed += r.report.full ? 1 : 0;
  run.check("points with full bracket rank", static_cast<double>(passed), static_cast<double>(rows.size()),
            passed == rows.size());
  return run.finish();
}

int malliavin_spectrum(const ExperimentConfig& cfg, const std::string& out, std::ostream& log) {
  Run run("malliavin-spectrum", "malliavin-nondegeneracy", cfg, out, log);
  const SdeModel model = cfg.model();
  const SubordinatorSpec spec = cfg.spec();
  const double t = cfg.horizon();
  const std::size_t n = cfg.paths(1000);
  const Vec x0 = cfg.x0();
  const double dt_max = cfg.dt_max() > 0.0 ? cfg.dt_max() : t / 256.0;
  struct Row {
    std::size_t jumps;
    double lmin;
    double lmax;
  };
  std::vector<Row> rows(n);
  parallel_for(n, cfg.threads(), [&](std::size_t i) {
    Rng rng = make_stream(cfg.seed(), i);
    const SubordinatorPath clock = sample_path(spec, t, cfg.eps(), rng);
    const TrajectoryBundle bundle = integrate(model, synthesize_noise(clock, model.d, dt_max, rng), x0);
    const auto cov = covariance(model, bundle, clock, t);
    const Eigen::SelfAdjointEigenSolver<MatrixXd> eig(0.5 * (cov.sigma + cov.sigma.transpose()), Eigen::EigenvaluesOnly);
    rows[i] = {clock.jumps.size(), eig.eigenvalues().minCoeff(), eig.eigenvalues().maxCoeff()};
  });
  run.csv("", [&](std::ostream& os) {
    os << "path,jumps,lambda_min,lambda_max\n" << std::setprecision(17);
    for (std::size_t i = 0; i < n; ++i) os << i << ',' << rows[i].jumps << ',' << rows[i].lmin << ',' << rows[i].lmax << '\n';
  });

  std::vector<Eigen::RowVectorXd> dirs;
  const auto flat = cfg.get_list("experiment.a", std::vector<double>(static_cast<std::size_t>(model.d), 0.0));
  if (flat.empty() || flat.size() % static_cast<std::size_t>(model.d) != 0) {
    throw ConfigError("invalid field experiment.a: need a multiple of the dimension");
  }
  for (std::size_t k = 0; k < flat.size(); k += static_cast<std::size_t>(model.d)) {
    Eigen::RowVectorXd a(model.d);
    for (int i = 0; i < model.d; ++i) a[i] = flat[k + static_cast<std::size_t>(i)];
    if (a.norm() == 0.0) a[0] = 1.0;
    dirs.push_back(a.normalized());
  }
  const auto eps_grid = cfg.get_list("experiment.eps_grid", {0.01, 0.02, 0.03, 0.05, 0.1});
  SmallBallOptions sb;
  sb.cut = cfg.eps();
  sb.dt_max = dt_max;
  sb.threads = cfg.threads();
  const auto profile = small_ball_profile(model, spec, x0, t, dirs, eps_grid,
                                          static_cast<std::size_t>(cfg.get_u64("experiment.small_ball_n", 10000)),
                                          cfg.seed() ^ 0x5ba11ULL, sb);
  run.csv("_small_ball", [&](std::ostream& os) { write_profile_csv(os, profile); });
  for (std::size_t k = 0; k < profile.slopes.size(); ++k) {
    run.info()["slope_" + std::to_string(k)] = std::isfinite(profile.slopes[k]) ? Json(profile.slopes[k]) : Json(nullptr);
  }
  std::size_t with_jump = 0, positive = 0;
  for (const auto& r : rows) {
    if (r.jumps == 0) continue;
    ++with_jump;
    positive += r.lmin > 0.0 ? 1 : 0;
  }
  run.info()["paths_with_jumps"] = with_jump;
  run.check("paths with positive smallest eigenvalue", static_cast<double>(positive), static_cast<double>(with_jump),
            positive == with_jump);
  return run.finish();
}

int generator_check(const ExperimentConfig& cfg, const std::string& out, std::ostream& log) {
  Run run("generator-check", "nonlocal-generator", cfg, out, log);
  const SdeModel model = cfg.model();
  const SubordinatorSpec spec = cfg.spec();
  const auto cal = stable_calibration(spec);
  const Vec y = cfg.has("experiment.y") ? to_vec(cfg.get_list("experiment.y", {})) : Vec::Zero(model.d);
  if (y.size() != model.d) throw ConfigError("invalid field experiment.y: wrong dimension");
  const double rtol = cfg.get_double("experiment.rtol", 1e-3);
  struct Row {
    Vec z;
    double value;
    double exact;
    double error;
  };
  std::vector<Row> rows;
  for (double r : cfg.get_list("experiment.radii", {0.5, 1.0, 2.0})) {
    for (int k = 0; k < model.d; ++k) {
      Vec z = Vec::Zero(model.d);
      z[k] = r;
      const double value = generator_apply(model, spec, TestFunction::cosine(z), y);
      const double phase = z.dot(y);
      const double exact = -cal.c_l * std::pow((model.a.transpose() * z).norm(), cal.alpha) * std::cos(phase) -
                           std::sin(phase) * z.dot(model.drift(y));
      const double scale = std::abs(exact) > 0.0 ? std::abs(exact) : 1.0;
      rows.push_back({z, value, exact, std::abs(value - exact) / scale});
    }
  }
  const double constant = generator_apply(model, spec, TestFunction::constant(1.0), y);
  run.csv("", [&](std::ostream& os) {
    for (int i = 0; i < model.d; ++i) os << "z_" << (i + 1) << ',';
    os << "generator,closed_form,relative_error\n" << std::setprecision(17);
    for (const auto& r : rows) {
      for (int i = 0; i < model.d; ++i) os << r.z[i] << ',';
      os << r.value << ',' << r.exact << ',' << r.error << '\n';
    }
  });
  double worst = 0.0;
  for (const auto& r : rows) worst = std::max(worst, r.error);
  run.check("generator of a constant", std::abs(constant), 0.0, constant == 0.0);
  run.check("max relative error against the Levy symbol", worst, rtol, worst <= rtol);
  return run.finish();
}

int fp_residual(const ExperimentConfig& cfg, const std::string& out, std::ostream& log) {
  Run run("fp-residual", "weak-fokker-planck", cfg, out, log);
  const SdeModel model = cfg.model();
  const SubordinatorSpec spec = cfg.spec();
  const double t = cfg.horizon();
  const double dt = cfg.get_double("experiment.dt", 0.01 * t);
  const std::size_t n = cfg.paths(100000);
  const Vec x0 = cfg.x0();
  const bool zero_drift = model.name == "zero-drift";
  TestFunction f = TestFunction::constant(0.0);
  if (zero_drift) {
    Vec z = Vec::Zero(model.d);
    z[0] = 0.2;
    if (cfg.has("experiment.z")) z = to_vec(cfg.get_list("experiment.z", {}));
    if (z.size() != model.d) throw ConfigError("invalid field experiment.z: wrong dimension");
    f = TestFunction::cosine(z);
  } else {
    Vec c = cfg.has("experiment.center") ? to_vec(cfg.get_list("experiment.center", {})) : Vec(x0);
    if (c.size() != model.d) throw ConfigError("invalid field experiment.center: wrong dimension");
    f = TestFunction::gaussian_bump(c, cfg.get_double("experiment.width", 0.5));
  }
  FpOptions opt;
  opt.branches = static_cast<std::size_t>(cfg.get_u64("experiment.branches", 32));
  opt.eps = cfg.eps();
  opt.dt_max = cfg.dt_max();
  opt.threads = cfg.threads();
  const FpReport r = fokker_planck_residual(model, spec, f, x0, t, dt, n, cfg.seed(), opt);
  run.csv("", [&](std::ostream& os) { write_residual_csv(os, {model.name}, {r}); });
  run.info()["lhs"] = r.lhs;
  run.info()["rhs"] = r.rhs;
  run.check("residual / budget", r.residual / r.budget, 1.0, r.pass);
  if (zero_drift) {
    const auto cal = stable_calibration(spec);
    Vec z = Vec::Zero(model.d);
    z[0] = 0.2;
    if (cfg.has("experiment.z")) z = to_vec(cfg.get_list("experiment.z", {}));
    const double rate = cal.c_l * std::pow((model.a.transpose() * z).norm(), cal.alpha);
    const double analytic = -rate * std::cos(z.dot(x0)) * std::exp(-t * rate);
    run.info()["analytic_derivative"] = analytic;
    const double ratio = r.budget / std::abs(analytic);
    run.check("budget / |analytic derivative|", ratio, 0.05, ratio <= 0.05);
  }
  return run.finish();
}

int decomp_check(const ExperimentConfig& cfg, const std::string& out, std::ostream& log) {
  Run run("decomp-check", "compound-poisson-decomposition", cfg, out, log);
  const SdeModel model = cfg.model();
  const SubordinatorSpec spec = cfg.spec();
  const std::size_t n = cfg.paths(10000);
  std::vector<Vec> z_grid;
  const auto radii = cfg.get_list("experiment.radii", {0.25, 0.5, 1.0, 1.5, 2.0});
  for (std::size_t k = 0; k < radii.size(); ++k) {
    Vec z = Vec::Zero(model.d);
    z[static_cast<Eigen::Index>(k % static_cast<std::size_t>(model.d))] = radii[k];
    z_grid.push_back(z);
  }
  const auto rep = verify_decomposition(spec, model.a, cfg.horizon(), z_grid, n, cfg.seed(), cfg.eps(), cfg.threads());
  run.csv("", [&](std::ostream& os) {
    for (int i = 0; i < model.d; ++i) os << "z_" << (i + 1) << ',';
    os << "re_full,im_full,re_split,im_split,discrepancy\n" << std::setprecision(17);
    for (std::size_t k = 0; k < z_grid.size(); ++k) {
      for (int i = 0; i < model.d; ++i) os << z_grid[k][i] << ',';
      os << rep.cf_full[k].real() << ',' << rep.cf_full[k].imag() << ',' << rep.cf_split[k].real() << ','
         << rep.cf_split[k].imag() << ',' << rep.discrepancy[k] << '\n';
    }
  });
  run.info()["big_jump_rate"] = rep.big_jump_rate;
  const double limit = 8.0 / std::sqrt(static_cast<double>(n));
  run.check("max CF discrepancy", rep.max_discrepancy, limit, rep.max_discrepancy <= limit);
  return run.finish();
}

int norris_bound(const ExperimentConfig& cfg, const std::string& out, std::ostream& log) {
  Run run("norris-bound", "exponential-clock-bound", cfg, out, log);
  const SubordinatorSpec spec = cfg.spec();
  const double horizon = cfg.horizon();
  const std::size_t n = cfg.paths(100000);
  std::vector<double> terminal(n);
  parallel_for(n, cfg.threads(), [&](std::size_t i) {
    Rng rng = make_stream(cfg.seed(), i);
    terminal[i] = sample_path(spec, horizon, cfg.eps(), rng).terminal();
  });
  const auto eps_grid = linspace(0.1, 1.0, 5);
  const auto delta_grid = linspace(0.5 * horizon, 0.9 * horizon, 5);
  const bool closed_form = spec.beta() == 0.5;
  const double nn = static_cast<double>(n);
  struct Row {
    double eps, delta, p, bound, sigma, oracle;
    bool pass;
  };
  std::vector<Row> rows;
  bool bound_ok = true, oracle_ok = true;
  for (double e : eps_grid) {
    std::size_t hits = 0;
    for (double s : terminal) hits += s <= e ? 1 : 0;
    const double p = static_cast<double>(hits) / nn;
    const double oracle = closed_form ? half_stable_subordinator_cdf(spec.c(), horizon, e) : p;
    const double sigma = std::sqrt(oracle * (1.0 - oracle) / nn);
    const bool match = !closed_form || std::abs(p - oracle) <= 3.0 * sigma;
    oracle_ok = oracle_ok && match;
    for (double delta : delta_grid) {
      const double bound = exponential_clock_bound(spec, e, delta);
      const bool ok = p <= bound + 3.0 * sigma;
      bound_ok = bound_ok && ok;
      rows.push_back({e, delta, p, bound, sigma, oracle, ok && match});
    }
  }
  run.csv("", [&](std::ostream& os) {
    os << "eps,delta,p_hat,bound,sigma,oracle,pass\n" << std::setprecision(17);
    for (const auto& r : rows) {
      os << r.eps << ',' << r.delta << ',' << r.p << ',' << r.bound << ',' << r.sigma << ',' << r.oracle << ','
         << (r.pass ? "pass" : "fail") << '\n';
    }
  });
  run.check("grid points below the exponential bound + 3 sigma", bound_ok ? 1.0 : 0.0, 1.0, bound_ok);
  if (closed_form) run.check("empirical CDF within 3 sigma of the closed form", oracle_ok ? 1.0 : 0.0, 1.0, oracle_ok);
  return run.finish();
}

int kinetic_density(const ExperimentConfig& cfg, const std::string& out, std::ostream& log) {
  Run run("kinetic-density", "density-positivity", cfg, out, log);
  const SdeModel model = cfg.model();
  if (model.d > 3) throw ConfigError("invalid field model: kinetic-density supports d <= 3");
  const SubordinatorSpec spec = cfg.spec();
  const double t = cfg.horizon();
  const std::size_t n = cfg.paths(100000);
  const Vec x0 = cfg.x0();
  const double dt_max = cfg.dt_max() > 0.0 ? cfg.dt_max() : t / 100.0;
  const SampleEnsemble ens = simulate_ensemble(model, spec, x0, t, n, cfg.seed(), {cfg.eps(), dt_max, cfg.threads()});

  SubordinatorPath still;
  still.horizon = t;
  Rng unused(0);
  const Vec flow = advance(model, synthesize_noise(still, model.d, dt_max, unused), x0);

  const double half = cfg.get_double("experiment.half_width", 3.0);
  const int points = static_cast<int>(cfg.get_u64("experiment.grid", model.d == 1 ? 401 : (model.d == 2 ? 81 : 31)));
  KdeGrid grid;
  for (int j = 0; j < model.d; ++j) grid.axes.push_back(linspace(flow[j] - half, flow[j] + half, points));
  const auto h = silverman_bandwidth(ens);
  const KdeResult kde = kde_density(ens, grid, h);
  run.csv("", [&](std::ostream& os) { write_kde_csv(os, kde); });

  const double radius = cfg.get_double("experiment.radius", 0.25);
  double min_near = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> idx(static_cast<std::size_t>(model.d), 0);
  for (double v : kde.values) {
    double dist2 = 0.0;
    for (int j = 0; j < model.d; ++j) {
      const double dx = grid.axes[static_cast<std::size_t>(j)][idx[static_cast<std::size_t>(j)]] - flow[j];
      dist2 += dx * dx;
    }
    if (dist2 <= radius * radius) min_near = std::min(min_near, v);
    for (std::size_t j = idx.size(); j-- > 0;) {
      if (++idx[j] < static_cast<std::size_t>(points)) break;
      idx[j] = 0;
    }
  }
  run.info()["mass_on_grid"] = kde.mass;
  run.info()["flow_image"] = std::vector<double>(flow.data(), flow.data() + flow.size());
  run.info()["bandwidth"] = h;
  run.check("min density near the deterministic flow image", min_near, 0.0, min_near > 0.0 && std::isfinite(min_near));
  return run.finish();
}

}  // namespace

const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names = {"ou-validate", "hormander-check", "malliavin-spectrum",
                                                 "generator-check", "fp-residual", "decomp-check",
                                                 "norris-bound", "kinetic-density"};
  return names;
}

int run_subcommand(const std::string& name, const ExperimentConfig& config, const std::string& out_dir,
                   std::ostream& log) {
  using Runner = int (*)(const ExperimentConfig&, const std::string&, std::ostream&);
  static const std::map<std::string, Runner> table = {
      {"ou-validate", ou_validate},         {"hormander-check", hormander_check},
      {"malliavin-spectrum", malliavin_spectrum}, {"generator-check", generator_check},
      {"fp-residual", fp_residual},         {"decomp-check", decomp_check},
      {"norris-bound", norris_bound},       {"kinetic-density", kinetic_density}};
  const auto it = table.find(name);
  if (it == table.end()) throw std::invalid_argument("unknown subcommand '" + name + "'");
  config.validate();
  return it->second(config, out_dir, log);
}

}  // namespace subsde
