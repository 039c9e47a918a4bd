#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "subsde/sde_flow.hpp"

namespace subsde {

// B_1 = grad b, B_n = (b . grad) B_{n-1} - grad b B_{n-1}.
struct BracketHierarchy {
  Vec x;
  int order = 0;
  std::vector<Eigen::MatrixXd> matrices;  // B_1 .. B_n
  Eigen::MatrixXd stacked;                // [A, B_1 A, ..., B_n A]
  Eigen::VectorXd singular_values;
  /// Entries (level, row, col) whose Richardson levels disagreed.
  struct Instability {
    int level;
    int row;
    int col;
    double discrepancy;
  };
  std::vector<Instability> unstable;
  std::vector<std::string> warnings;
};

constexpr double kRankTol = 1e-8;
constexpr double kRichardsonTol = 1e-3;

/// h <= 0 picks the default base step 1e-4 (1 + |x|).
BracketHierarchy bracket_hierarchy(const SdeModel& model, const Vec& x, int n, double h = 0.0);

struct RankReport {
  bool full = false;
  int rank = 0;
  double smallest_retained = 0.0;
};

/// Numerical rank: singular values above tol * sigma_max.
RankReport numerical_rank(const Eigen::MatrixXd& m, double tol = kRankTol);

RankReport check_hn(const SdeModel& model, const Vec& x, int n, double tol = kRankTol);

/// Rank of [A, BA, ..., B^{d-1} A].
int kalman_rank(const Eigen::MatrixXd& b, const Eigen::MatrixXd& a, double tol = kRankTol);

/// min over points of lambda_min(A A^T + grad b A (grad b A)^T).
double uniform_h1_constant(const SdeModel& model, const std::vector<Vec>& points);

/// Same construction with the terms B_k A (B_k A)^T for k <= n. Diagnostic only.
double uniform_hn_diagnostic(const SdeModel& model, const std::vector<Vec>& points, int n);

struct RankRow {
  Vec x;
  RankReport report;
};

/// CSV rows (x_1..x_d, rank, smallest_sigma, pass).
void write_rank_csv(std::ostream& os, const std::vector<RankRow>& rows);

}  // namespace subsde
