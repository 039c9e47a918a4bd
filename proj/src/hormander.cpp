#include "subsde/hormander.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <stdexcept>

#include <Eigen/SVD>

#include "subsde/linalg.hpp"

namespace subsde {

namespace {

using Eigen::MatrixXd;

struct Evaluator {
  const SdeModel& model;
  double h;

  // Derivative along b(x), scaled by |b(x)|, with one Richardson step.
  MatrixXd along_drift(const Vec& x, int level, MatrixXd* richardson_gap) const {
    const Vec b = model.drift(x);
    const double speed = b.norm();
    if (speed == 0.0) {
      if (richardson_gap) *richardson_gap = MatrixXd::Zero(model.d, model.d);
      return MatrixXd::Zero(model.d, model.d);
    }
    const Vec u = b / speed;
    auto central = [&](double step) {
      const Vec xp = x + step * u;
      const Vec xm = x - step * u;
      return MatrixXd((value(xp, level) - value(xm, level)) / (2.0 * step));
    };
    const MatrixXd coarse = central(h);
    const MatrixXd fine = central(0.5 * h);
    const MatrixXd extrapolated = (4.0 * fine - coarse) / 3.0;
    if (richardson_gap) *richardson_gap = speed * (extrapolated - fine);
    return speed * extrapolated;
  }

  MatrixXd value(const Vec& x, int level, MatrixXd* gap = nullptr) const {
    const MatrixXd grad = model.jacobian(x);
    if (level == 1) {
      if (gap) *gap = MatrixXd::Zero(model.d, model.d);
      return grad;
    }
    const MatrixXd prev = value(x, level - 1);
    if (level == 2 && model.jacobian_derivative) {
      if (gap) *gap = MatrixXd::Zero(model.d, model.d);
      return MatrixXd(model.jacobian_derivative(x, model.drift(x))) - grad * prev;
    }
    return along_drift(x, level - 1, gap) - grad * prev;
  }
};

}  // namespace

BracketHierarchy bracket_hierarchy(const SdeModel& model, const Vec& x, int n, double h) {
  if (n < 1) throw std::invalid_argument("bracket order must be at least 1");
  if (x.size() != model.d) throw std::invalid_argument("evaluation point has wrong dimension");
  if (!model.jacobian) throw std::invalid_argument("model has no Jacobian");
  const double step = h > 0.0 ? h : 1e-4 * (1.0 + x.norm());
  const Evaluator eval{model, step};

  BracketHierarchy out;
  out.x = x;
  out.order = n;
  if (n > 4) {
    out.warnings.push_back("order " + std::to_string(n) +
                           " uses nested differences beyond level 4; supply analytic derivatives");
  }
  const int d = model.d;
  const MatrixXd a = model.a;
  out.stacked.resize(d, (n + 1) * d);
  out.stacked.leftCols(d) = a;
  for (int level = 1; level <= n; ++level) {
    MatrixXd gap;
    MatrixXd bn = eval.value(x, level, &gap);
    const double scale = std::max(1.0, bn.cwiseAbs().maxCoeff());
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) {
        if (std::abs(gap(i, j)) > kRichardsonTol * scale) {
          out.unstable.push_back({level, i, j, gap(i, j)});
        }
      }
    }
    out.stacked.middleCols(level * d, d) = bn * a;
    out.matrices.push_back(std::move(bn));
  }
  out.singular_values = Eigen::JacobiSVD<MatrixXd>(out.stacked).singularValues();
  return out;
}

RankReport numerical_rank(const Eigen::MatrixXd& m, double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("rank tolerance must be positive");
  const Eigen::VectorXd s = Eigen::JacobiSVD<Eigen::MatrixXd>(m).singularValues();
  RankReport r;
  if (s.size() == 0 || s[0] == 0.0) return r;
  const double cliff = tol * s[0];
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s[i] > cliff) {
      ++r.rank;
      r.smallest_retained = s[i];
    }
  }
  r.full = r.rank == m.rows();
  return r;
}

RankReport check_hn(const SdeModel& model, const Vec& x, int n, double tol) {
  return numerical_rank(bracket_hierarchy(model, x, n).stacked, tol);
}

int kalman_rank(const Eigen::MatrixXd& b, const Eigen::MatrixXd& a, double tol) {
  const auto d = b.rows();
  if (b.cols() != d || a.rows() != d || a.cols() != d) throw std::invalid_argument("matrices must be square d x d");
  Eigen::MatrixXd k(d, d * d);
  Eigen::MatrixXd block = a;
  for (Eigen::Index i = 0; i < d; ++i) {
    k.middleCols(i * d, d) = block;
    block = b * block;
  }
  return numerical_rank(k, tol).rank;
}

double uniform_hn_diagnostic(const SdeModel& model, const std::vector<Vec>& points, int n) {
  if (points.empty()) throw std::invalid_argument("need at least one sample point");
  const Eigen::MatrixXd a = model.a;
  double best = std::numeric_limits<double>::infinity();
  for (const auto& x : points) {
    Eigen::MatrixXd g = a * a.transpose();
    if (n == 1) {
      const Eigen::MatrixXd ba = Eigen::MatrixXd(model.jacobian(x)) * a;
      g += ba * ba.transpose();
    } else {
      const auto hier = bracket_hierarchy(model, x, n);
      for (const auto& bk : hier.matrices) {
        const Eigen::MatrixXd ba = bk * a;
        g += ba * ba.transpose();
      }
    }
    best = std::min(best, min_eigenvalue(g));
  }
  return std::max(best, 0.0);
}

double uniform_h1_constant(const SdeModel& model, const std::vector<Vec>& points) {
  return uniform_hn_diagnostic(model, points, 1);
}

void write_rank_csv(std::ostream& os, const std::vector<RankRow>& rows) {
  const int d = rows.empty() ? 0 : static_cast<int>(rows.front().x.size());
  for (int i = 0; i < d; ++i) os << "x_" << (i + 1) << ',';
  os << "rank,smallest_sigma,pass\n" << std::setprecision(17);
  for (const auto& row : rows) {
    for (int i = 0; i < d; ++i) os << row.x[i] << ',';
    os << row.report.rank << ',' << row.report.smallest_retained << ',' << (row.report.full ? "pass" : "fail") << '\n';
  }
}

}  // namespace subsde
