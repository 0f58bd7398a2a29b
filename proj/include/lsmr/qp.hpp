#pragma once

#include <Eigen/Core>
#include <vector>

namespace lsmr {

/// min 0.5 x'Hx + g'x  s.t.  C x >= d. H must be positive definite.
struct QpProblem {
  Eigen::MatrixXd H;
  Eigen::VectorXd g;
  Eigen::MatrixXd C;  // m x n, one constraint per row
  Eigen::VectorXd d;
};

struct QpResult {
  Eigen::VectorXd x;
  Eigen::VectorXd multipliers;  // one per constraint, zero when inactive
  std::vector<int> active;
  int iterations = 0;
  bool feasible = true;
};

/// Goldfarb-Idnani dual active-set method. Starts from the unconstrained minimum and adds
/// the most violated constraint at each outer iteration.
QpResult solve_qp(const QpProblem& qp, double tol = 1e-12, int max_iter = 1000);

}  // namespace lsmr
