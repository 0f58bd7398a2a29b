#include "lsmr/qp.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace lsmr {

QpResult solve_qp(const QpProblem& qp, double tol, int max_iter) {
  const Eigen::Index n = qp.H.rows();
  const Eigen::Index m = qp.C.rows();
  if (qp.H.cols() != n || qp.g.size() != n || (m > 0 && qp.C.cols() != n) || qp.d.size() != m) {
    throw std::invalid_argument("qp: inconsistent dimensions");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(qp.H);
  if (llt.info() != Eigen::Success) throw std::invalid_argument("qp: Hessian is not positive definite");
  const Eigen::MatrixXd l_inv = llt.matrixL().solve(Eigen::MatrixXd::Identity(n, n));

  QpResult res;
  res.x = llt.solve(-qp.g);
  res.multipliers = Eigen::VectorXd::Zero(m);
  std::vector<int>& act = res.active;
  std::vector<double> u;  // multipliers of the active set, same order as act

  // Scaled constraint rows keep the violation test meaningful across mixed magnitudes.
  Eigen::VectorXd row_norm(m);
  for (Eigen::Index i = 0; i < m; ++i) row_norm[i] = std::max(qp.C.row(i).norm(), 1e-300);

  const double inf = std::numeric_limits<double>::infinity();
  while (res.iterations < max_iter) {
    // Most violated inactive constraint.
    int p = -1;
    double worst = -tol;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (std::find(act.begin(), act.end(), static_cast<int>(i)) != act.end()) continue;
      const double s = (qp.C.row(i).dot(res.x) - qp.d[i]) / row_norm[i];
      if (s < worst) {
        worst = s;
        p = static_cast<int>(i);
      }
    }
    if (p < 0) break;

    const Eigen::VectorXd np = qp.C.row(p).transpose();
    double up = 0.0;
    while (true) {
      ++res.iterations;
      if (res.iterations > max_iter) break;
      const Eigen::VectorXd w = l_inv * np;
      Eigen::VectorXd r;
      Eigen::VectorXd z;
      if (act.empty()) {
        z = l_inv.transpose() * w;
      } else {
        Eigen::MatrixXd b(n, static_cast<Eigen::Index>(act.size()));
        for (std::size_t j = 0; j < act.size(); ++j) b.col(static_cast<Eigen::Index>(j)) = l_inv * qp.C.row(act[j]).transpose();
        r = b.colPivHouseholderQr().solve(w);
        z = l_inv.transpose() * (w - b * r);
      }
      // Partial step: largest t keeping active multipliers non-negative.
      double t1 = inf;
      int drop = -1;
      for (std::size_t j = 0; j < act.size(); ++j) {
        if (r[static_cast<Eigen::Index>(j)] > 1e-14) {
          const double t = u[j] / r[static_cast<Eigen::Index>(j)];
          if (t < t1) {
            t1 = t;
            drop = static_cast<int>(j);
          }
        }
      }
      const double zn = z.dot(np);
      const double sp = np.dot(res.x) - qp.d[p];
      const double t2 = (z.norm() <= 1e-14 * std::max(1.0, np.norm()) || zn <= 0.0) ? inf : -sp / zn;
      const double t = std::min(t1, t2);
      if (!std::isfinite(t)) {
        res.feasible = false;
        break;
      }
      if (std::isfinite(t2)) res.x += t * z;
      for (std::size_t j = 0; j < act.size(); ++j) u[j] -= t * r[static_cast<Eigen::Index>(j)];
      up += t;
      if (t == t2) {
        act.push_back(p);
        u.push_back(up);
        break;
      }
      act.erase(act.begin() + drop);
      u.erase(u.begin() + drop);
    }
    if (!res.feasible || res.iterations > max_iter) break;
  }
  if (res.iterations > max_iter) res.feasible = false;
  for (std::size_t j = 0; j < act.size(); ++j) res.multipliers[act[j]] = std::max(u[j], 0.0);
  return res;
}

}  // namespace lsmr
