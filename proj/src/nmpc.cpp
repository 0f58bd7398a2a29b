#include "lsmr/nmpc.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include "lsmr/qp.hpp"

namespace lsmr {

void OcpConfig::validate() const {
  if (horizon < 2) throw std::invalid_argument("nmpc: horizon must be at least 2");
  if (!(dt > 0.0)) throw std::invalid_argument("nmpc: dt must be positive");
  if ((q_x.array() < 0).any() || (q_xdot.array() < 0).any() || (q_xN.array() < 0).any() ||
      (q_xdotN.array() < 0).any() || (r_bar.array() < 0).any()) {
    throw std::invalid_argument("nmpc: weights must be non-negative");
  }
  if ((x_min.array() > x_max.array()).any() || (rate_min.array() > rate_max.array()).any() ||
      (accel_min.array() > accel_max.array()).any()) {
    throw std::invalid_argument("nmpc: bound minimum exceeds maximum");
  }
  if (!rate_min.allFinite() || !rate_max.allFinite() || !accel_min.allFinite() || !accel_max.allFinite()) {
    throw std::invalid_argument("nmpc: control and rate bounds must be finite");
  }
  if (!geometry.valid()) throw std::invalid_argument("nmpc: invalid geometry");
}

Eigen::VectorXd Trajectory::flatten() const {
  const DecisionLayout lay{horizon()};
  Eigen::VectorXd z(lay.size());
  for (int k = 0; k < lay.N; ++k) {
    z.segment<3>(lay.state(k, 0)) = x[static_cast<std::size_t>(k)];
    z.segment<2>(lay.control(k, 0)) = u[static_cast<std::size_t>(k)];
  }
  z.segment<3>(lay.state(lay.N, 0)) = x[static_cast<std::size_t>(lay.N)];
  return z;
}

Trajectory Trajectory::unflatten(const Eigen::VectorXd& z, int N) {
  const DecisionLayout lay{N};
  if (z.size() != lay.size()) throw std::invalid_argument("decision vector length must be 5N+3");
  Trajectory t;
  t.x.resize(static_cast<std::size_t>(N + 1));
  t.u.resize(static_cast<std::size_t>(N));
  for (int k = 0; k < N; ++k) {
    t.x[static_cast<std::size_t>(k)] = z.segment<3>(lay.state(k, 0));
    t.u[static_cast<std::size_t>(k)] = z.segment<2>(lay.control(k, 0));
  }
  t.x[static_cast<std::size_t>(N)] = z.segment<3>(lay.state(N, 0));
  return t;
}

NlpInstance transcribe(const OcpConfig& cfg, const std::vector<RefSample>& ref, const Pose2& x_msr,
                       const WheelRates& rate_msr) {
  cfg.validate();
  if (static_cast<int>(ref.size()) < cfg.horizon + 1) {
    throw std::invalid_argument("nmpc: reference shorter than the horizon");
  }
  const Eigen::Vector3d p = x_msr.vec();
  if (!p.allFinite() || !std::isfinite(rate_msr.right) || !std::isfinite(rate_msr.left)) {
    throw std::invalid_argument("nmpc: non-finite measurement");
  }
  NlpInstance nlp{cfg, std::vector<RefSample>(ref.begin(), ref.begin() + cfg.horizon + 1), x_msr, rate_msr};
  return nlp;
}

Eigen::Vector3d shooting_step(const Eigen::Vector3d& x, const Eigen::Vector2d& u, const RobotGeometry& geom,
                              double dt, Integrator scheme, Eigen::Matrix3d* A, Eigen::Matrix<double, 3, 2>* B) {
  // With a constant twist the yaw is linear in time, so both schemes reduce to weighted
  // sums of cos/sin at fixed fractions of the yaw increment.
  static constexpr double kRk4W[3] = {1.0 / 6.0, 4.0 / 6.0, 1.0 / 6.0};
  static constexpr double kRk4A[3] = {0.0, 0.5, 1.0};
  static constexpr double kEulerW[1] = {1.0};
  static constexpr double kEulerA[1] = {0.0};
  const double* w = scheme == Integrator::RK4 ? kRk4W : kEulerW;
  const double* a = scheme == Integrator::RK4 ? kRk4A : kEulerA;
  const int n = scheme == Integrator::RK4 ? 3 : 1;

  const double r = geom.wheel_radius;
  const double c = geom.half_track;
  const double v = 0.5 * r * (u[0] + u[1]);
  const double om = 0.5 * r / c * (u[0] - u[1]);
  double cs = 0.0, sn = 0.0, cs_a = 0.0, sn_a = 0.0;
  for (int i = 0; i < n; ++i) {
    const double ang = x[2] + a[i] * om * dt;
    const double ci = std::cos(ang), si = std::sin(ang);
    cs += w[i] * ci;
    sn += w[i] * si;
    cs_a += w[i] * a[i] * dt * ci;
    sn_a += w[i] * a[i] * dt * si;
  }
  const Eigen::Vector3d next{x[0] + dt * v * cs, x[1] + dt * v * sn, x[2] + dt * om};
  if (A) {
    A->setIdentity();
    (*A)(0, 2) = -dt * v * sn;
    (*A)(1, 2) = dt * v * cs;
  }
  if (B) {
    const Eigen::Vector3d d_v{dt * cs, dt * sn, 0.0};
    const Eigen::Vector3d d_om{-dt * v * sn_a, dt * v * cs_a, dt};
    B->col(0) = 0.5 * r * d_v + 0.5 * r / c * d_om;
    B->col(1) = 0.5 * r * d_v - 0.5 * r / c * d_om;
  }
  return next;
}

namespace {

Eigen::Vector3d model_rate(const Eigen::Vector3d& x, const Eigen::Vector2d& u, const RobotGeometry& g) {
  const double v = 0.5 * g.wheel_radius * (u[0] + u[1]);
  return {v * std::cos(x[2]), v * std::sin(x[2]), 0.5 * g.wheel_radius / g.half_track * (u[0] - u[1])};
}

Eigen::Vector3d pose_residual(const Eigen::Vector3d& x, const Pose2& ref) {
  return {x[0] - ref.x, x[1] - ref.y, wrap_angle(x[2] - ref.yaw)};
}

/// Residual block rho and its Jacobians for a stage (or the terminal) so that the cost is sum 0.5 |rho|^2.
struct StageResidual {
  Eigen::Matrix<double, 8, 1> rho;
  Eigen::Matrix<double, 8, 3> jx;
  Eigen::Matrix<double, 8, 2> ju;
  int rows = 8;
};

StageResidual stage_residual(const OcpConfig& cfg, const Eigen::Vector3d& x, const Eigen::Vector2d& u,
                             const RefSample& ref, bool terminal) {
  StageResidual s;
  s.rho.setZero();
  s.jx.setZero();
  s.ju.setZero();
  const double scale = terminal ? std::sqrt(2.0) : 1.0;
  const Eigen::Vector3d sq = (terminal ? cfg.q_xN : cfg.q_x).cwiseSqrt() * scale;
  const Eigen::Vector3d sqd = (terminal ? cfg.q_xdotN : cfg.q_xdot).cwiseSqrt() * scale;
  const RobotGeometry& g = cfg.geometry;

  s.rho.head<3>() = sq.cwiseProduct(pose_residual(x, ref.pose));
  s.jx.topRows<3>() = sq.asDiagonal();

  const Eigen::Vector3d f = model_rate(x, u, g);
  s.rho.segment<3>(3) = sqd.cwiseProduct(f - ref.rate);
  const double v = 0.5 * g.wheel_radius * (u[0] + u[1]);
  Eigen::Matrix3d fx = Eigen::Matrix3d::Zero();
  fx(0, 2) = -v * std::sin(x[2]);
  fx(1, 2) = v * std::cos(x[2]);
  Eigen::Matrix<double, 3, 2> fu;
  const double hr = 0.5 * g.wheel_radius;
  const double hw = 0.5 * g.wheel_radius / g.half_track;
  fu << hr * std::cos(x[2]), hr * std::cos(x[2]), hr * std::sin(x[2]), hr * std::sin(x[2]), hw, -hw;
  s.jx.middleRows<3>(3) = sqd.asDiagonal() * fx;
  s.ju.middleRows<3>(3) = sqd.asDiagonal() * fu;

  if (terminal) {
    s.rows = 6;
  } else {
    const Eigen::Vector2d sr = cfg.r_bar.cwiseSqrt();
    s.rho.tail<2>() = sr.cwiseProduct(u);
    s.ju.bottomRows<2>() = sr.asDiagonal();
  }
  return s;
}

double trajectory_cost(const NlpInstance& nlp, const Trajectory& t) {
  const int N = nlp.cfg.horizon;
  double j = 0.0;
  for (int k = 1; k < N; ++k) {
    const auto s = stage_residual(nlp.cfg, t.x[static_cast<std::size_t>(k)], t.u[static_cast<std::size_t>(k)],
                                  nlp.ref[static_cast<std::size_t>(k)], false);
    j += 0.5 * s.rho.squaredNorm();
  }
  const auto s = stage_residual(nlp.cfg, t.x[static_cast<std::size_t>(N)], t.u[static_cast<std::size_t>(N - 1)],
                                nlp.ref[static_cast<std::size_t>(N)], true);
  return j + 0.5 * s.rho.head(s.rows).squaredNorm();
}

Eigen::VectorXd trajectory_defects(const NlpInstance& nlp, const Trajectory& t) {
  const int N = nlp.cfg.horizon;
  Eigen::VectorXd h(3 * N);
  for (int k = 0; k < N; ++k) {
    h.segment<3>(3 * k) = t.x[static_cast<std::size_t>(k + 1)] -
                          shooting_step(t.x[static_cast<std::size_t>(k)], t.u[static_cast<std::size_t>(k)],
                                        nlp.cfg.geometry, nlp.cfg.dt, nlp.cfg.integrator);
  }
  return h;
}

Eigen::Vector2d clip_box(const Eigen::Vector2d& u, const OcpConfig& cfg) {
  return u.cwiseMax(cfg.rate_min).cwiseMin(cfg.rate_max);
}

void pin_initial(const NlpInstance& nlp, Trajectory& t) {
  const double yaw0 = t.x[0][2];
  t.x[0] = {nlp.x_msr.x, nlp.x_msr.y, yaw0 + wrap_angle(nlp.x_msr.yaw - yaw0)};
  t.u[0] = clip_box(nlp.rate_msr.vec(), nlp.cfg);
}

}  // namespace

double cost(const NlpInstance& nlp, const Eigen::VectorXd& z) {
  return trajectory_cost(nlp, Trajectory::unflatten(z, nlp.cfg.horizon));
}

Eigen::VectorXd cost_gradient(const NlpInstance& nlp, const Eigen::VectorXd& z) {
  const int N = nlp.cfg.horizon;
  const DecisionLayout lay{N};
  const Trajectory t = Trajectory::unflatten(z, N);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(lay.size());
  for (int k = 1; k < N; ++k) {
    const auto s = stage_residual(nlp.cfg, t.x[static_cast<std::size_t>(k)], t.u[static_cast<std::size_t>(k)],
                                  nlp.ref[static_cast<std::size_t>(k)], false);
    g.segment<3>(lay.state(k, 0)) += s.jx.transpose() * s.rho;
    g.segment<2>(lay.control(k, 0)) += s.ju.transpose() * s.rho;
  }
  const auto s = stage_residual(nlp.cfg, t.x[static_cast<std::size_t>(N)], t.u[static_cast<std::size_t>(N - 1)],
                                nlp.ref[static_cast<std::size_t>(N)], true);
  g.segment<3>(lay.state(N, 0)) += s.jx.topRows(6).transpose() * s.rho.head(6);
  g.segment<2>(lay.control(N - 1, 0)) += s.ju.topRows(6).transpose() * s.rho.head(6);
  return g;
}

Eigen::VectorXd defects(const NlpInstance& nlp, const Eigen::VectorXd& z) {
  return trajectory_defects(nlp, Trajectory::unflatten(z, nlp.cfg.horizon));
}

namespace {

double trajectory_violation(const OcpConfig& cfg, const Trajectory& t) {
  double worst = 0.0;
  const int N = cfg.horizon;
  for (int k = 0; k < N; ++k) {
    const Eigen::Vector2d& u = t.u[static_cast<std::size_t>(k)];
    worst = std::max({worst, (cfg.rate_min - u).maxCoeff(), (u - cfg.rate_max).maxCoeff()});
    if (k + 1 < N) {
      const Eigen::Vector2d du = t.u[static_cast<std::size_t>(k + 1)] - u;
      worst = std::max({worst, (cfg.accel_min * cfg.dt - du).maxCoeff(), (du - cfg.accel_max * cfg.dt).maxCoeff()});
    }
  }
  for (int k = 0; k <= N; ++k) {
    const Eigen::Vector3d& x = t.x[static_cast<std::size_t>(k)];
    for (int c = 0; c < 3; ++c) {
      if (std::isfinite(cfg.x_min[c])) worst = std::max(worst, cfg.x_min[c] - x[c]);
      if (std::isfinite(cfg.x_max[c])) worst = std::max(worst, x[c] - cfg.x_max[c]);
    }
  }
  return worst;
}

}  // namespace

double bound_violation(const NlpInstance& nlp, const Eigen::VectorXd& z) {
  return trajectory_violation(nlp.cfg, Trajectory::unflatten(z, nlp.cfg.horizon));
}

std::string_view to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Converged: return "converged";
    case SolveStatus::RealtimePartial: return "realtime-partial";
    case SolveStatus::Fault: return "fault";
  }
  return "?";
}

void clamp_controls(Trajectory& traj, const OcpConfig& cfg) {
  traj.u[0] = clip_box(traj.u[0], cfg);
  for (std::size_t k = 1; k < traj.u.size(); ++k) {
    const Eigen::Vector2d lo = cfg.rate_min.cwiseMax(traj.u[k - 1] + cfg.accel_min * cfg.dt);
    const Eigen::Vector2d hi = cfg.rate_max.cwiseMin(traj.u[k - 1] + cfg.accel_max * cfg.dt);
    traj.u[k] = traj.u[k].cwiseMax(lo).cwiseMin(hi);
  }
}

Trajectory initial_guess(const NlpInstance& nlp) {
  const OcpConfig& cfg = nlp.cfg;
  const int N = cfg.horizon;
  Trajectory t;
  t.x.assign(static_cast<std::size_t>(N + 1), Eigen::Vector3d::Zero());
  t.u.assign(static_cast<std::size_t>(N), Eigen::Vector2d::Zero());
  t.x[0] = nlp.x_msr.vec();
  t.u[0] = nlp.rate_msr.vec();
  for (int k = 1; k < N; ++k) {
    const RefSample& r = nlp.ref[static_cast<std::size_t>(k)];
    const double vx = r.rate[0] * std::cos(r.pose.yaw) + r.rate[1] * std::sin(r.pose.yaw);
    t.u[static_cast<std::size_t>(k)] = twist_to_wheel(vx, r.rate[2], cfg.geometry).vec();
  }
  clamp_controls(t, cfg);
  for (int k = 0; k < N; ++k) {
    t.x[static_cast<std::size_t>(k + 1)] = shooting_step(t.x[static_cast<std::size_t>(k)],
                                                         t.u[static_cast<std::size_t>(k)], cfg.geometry, cfg.dt,
                                                         cfg.integrator);
  }
  return t;
}

Trajectory shift_solution(const Trajectory& traj, double elapsed, const OcpConfig& cfg) {
  const int N = traj.horizon();
  const double shift = elapsed / cfg.dt;
  Trajectory out;
  out.x.resize(static_cast<std::size_t>(N + 1));
  out.u.resize(static_cast<std::size_t>(N));
  auto state_at = [&](double s) -> Eigen::Vector3d {
    if (s >= N) {
      // Beyond the horizon: keep integrating with the last control.
      return shooting_step(traj.x[static_cast<std::size_t>(N)], traj.u[static_cast<std::size_t>(N - 1)],
                           cfg.geometry, (s - N) * cfg.dt, cfg.integrator);
    }
    const int i = static_cast<int>(std::floor(s));
    const double f = s - i;
    if (f == 0.0) return traj.x[static_cast<std::size_t>(i)];
    return (1.0 - f) * traj.x[static_cast<std::size_t>(i)] + f * traj.x[static_cast<std::size_t>(i + 1)];
  };
  auto control_at = [&](double s) -> Eigen::Vector2d {
    if (s >= N - 1) return traj.u[static_cast<std::size_t>(N - 1)];
    const int i = static_cast<int>(std::floor(s));
    const double f = s - i;
    if (f == 0.0) return traj.u[static_cast<std::size_t>(i)];
    return (1.0 - f) * traj.u[static_cast<std::size_t>(i)] + f * traj.u[static_cast<std::size_t>(i + 1)];
  };
  for (int k = 0; k <= N; ++k) out.x[static_cast<std::size_t>(k)] = state_at(k + shift);
  for (int k = 0; k < N; ++k) out.u[static_cast<std::size_t>(k)] = control_at(k + shift);
  return out;
}

namespace {

struct Linearized {
  Eigen::MatrixXd M;          // residual sensitivity to the free controls
  Eigen::VectorXd rho;        // residuals at the current point
  Eigen::VectorXd rho_shift;  // residual change from closing the defects (controls fixed)
  std::vector<Eigen::Matrix3d> A;
  std::vector<Eigen::Vector3d> c;       // state change at zero control step
  std::vector<Eigen::MatrixXd> G;       // state sensitivity to the free controls
  Eigen::VectorXd h;                    // defects x_{k+1} - F(x_k, u_k)
};

Linearized linearize_nlp(const NlpInstance& nlp, const Trajectory& t) {
  const OcpConfig& cfg = nlp.cfg;
  const int N = cfg.horizon;
  const int n = 2 * (N - 1);
  Linearized lin;
  lin.A.resize(static_cast<std::size_t>(N));
  lin.c.assign(static_cast<std::size_t>(N + 1), Eigen::Vector3d::Zero());
  lin.G.assign(static_cast<std::size_t>(N + 1), Eigen::MatrixXd::Zero(3, n));
  lin.h.resize(3 * N);
  for (int k = 0; k < N; ++k) {
    Eigen::Matrix3d A;
    Eigen::Matrix<double, 3, 2> B;
    const auto ks = static_cast<std::size_t>(k);
    const Eigen::Vector3d next = shooting_step(t.x[ks], t.u[ks], cfg.geometry, cfg.dt, cfg.integrator, &A, &B);
    const Eigen::Vector3d d = next - t.x[ks + 1];
    lin.h.segment<3>(3 * k) = -d;
    lin.A[ks] = A;
    lin.c[ks + 1] = A * lin.c[ks] + d;
    lin.G[ks + 1] = A * lin.G[ks];
    if (k >= 1) lin.G[ks + 1].block(0, 2 * (k - 1), 3, 2) += B;
  }

  const int rows = 8 * (N - 1) + 6;
  lin.M = Eigen::MatrixXd::Zero(rows, n);
  lin.rho.resize(rows);
  lin.rho_shift.resize(rows);
  int row = 0;
  for (int k = 1; k <= N; ++k) {
    const bool terminal = k == N;
    const auto ks = static_cast<std::size_t>(k);
    const int uk = terminal ? N - 1 : k;
    const auto s = stage_residual(cfg, t.x[ks], t.u[static_cast<std::size_t>(uk)], nlp.ref[ks], terminal);
    const int m = s.rows;
    lin.rho.segment(row, m) = s.rho.head(m);
    lin.rho_shift.segment(row, m) = s.jx.topRows(m) * lin.c[ks];
    lin.M.middleRows(row, m) = s.jx.topRows(m) * lin.G[ks];
    lin.M.block(row, 2 * (uk - 1), m, 2) += s.ju.topRows(m);
    row += m;
  }
  return lin;
}

QpProblem build_qp(const NlpInstance& nlp, const Trajectory& t, const Linearized& lin) {
  const OcpConfig& cfg = nlp.cfg;
  const int N = cfg.horizon;
  const int n = 2 * (N - 1);
  QpProblem qp;
  qp.H = lin.M.transpose() * lin.M;
  qp.H.diagonal().array() += 1e-10;
  qp.g = lin.M.transpose() * (lin.rho + lin.rho_shift);

  std::vector<Eigen::VectorXd> rows;
  std::vector<double> rhs;
  auto add = [&](Eigen::VectorXd row, double b) {
    rows.push_back(std::move(row));
    rhs.push_back(b);
  };
  for (int k = 1; k < N; ++k) {
    for (int c = 0; c < 2; ++c) {
      const int col = 2 * (k - 1) + c;
      const double uk = t.u[static_cast<std::size_t>(k)][c];
      Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
      e[col] = 1.0;
      add(e, cfg.rate_min[c] - uk);
      add(-e, uk - cfg.rate_max[c]);
    }
  }
  for (int k = 0; k + 1 < N; ++k) {
    for (int c = 0; c < 2; ++c) {
      Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
      e[2 * k + c] = 1.0;  // delta u_{k+1}
      if (k >= 1) e[2 * (k - 1) + c] = -1.0;
      const double du = t.u[static_cast<std::size_t>(k + 1)][c] - t.u[static_cast<std::size_t>(k)][c];
      add(e, cfg.accel_min[c] * cfg.dt - du);
      add(-e, du - cfg.accel_max[c] * cfg.dt);
    }
  }
  for (int k = 1; k <= N; ++k) {
    const auto ks = static_cast<std::size_t>(k);
    for (int c = 0; c < 3; ++c) {
      const double base = t.x[ks][c] + lin.c[ks][c];
      if (std::isfinite(cfg.x_min[c])) add(lin.G[ks].row(c).transpose(), cfg.x_min[c] - base);
      if (std::isfinite(cfg.x_max[c])) add(-lin.G[ks].row(c).transpose(), base - cfg.x_max[c]);
    }
  }
  qp.C.resize(static_cast<Eigen::Index>(rows.size()), n);
  qp.d.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    qp.C.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
    qp.d[static_cast<Eigen::Index>(i)] = rhs[i];
  }
  return qp;
}

/// Multiplier estimate for the shooting equalities from stationarity in the states.
Eigen::VectorXd equality_multipliers(const NlpInstance& nlp, const Trajectory& t, const Linearized& lin) {
  const int N = nlp.cfg.horizon;
  const DecisionLayout lay{N};
  const Eigen::VectorXd g = cost_gradient(nlp, t.flatten());
  Eigen::VectorXd lam(3 * N);
  lam.segment<3>(3 * (N - 1)) = -g.segment<3>(lay.state(N, 0));
  for (int k = N - 1; k >= 1; --k) {
    lam.segment<3>(3 * (k - 1)) =
        lin.A[static_cast<std::size_t>(k)].transpose() * lam.segment<3>(3 * k) - g.segment<3>(lay.state(k, 0));
  }
  return lam;
}

Trajectory apply_step(const Trajectory& t, const Linearized& lin, const Eigen::VectorXd& du, double alpha) {
  Trajectory out = t;
  const int N = t.horizon();
  for (int k = 1; k < N; ++k) out.u[static_cast<std::size_t>(k)] += alpha * du.segment<2>(2 * (k - 1));
  for (int k = 1; k <= N; ++k) {
    const auto ks = static_cast<std::size_t>(k);
    out.x[ks] += alpha * (lin.c[ks] + lin.G[ks] * du);
  }
  return out;
}

std::uint32_t active_mask(const Trajectory& t, const OcpConfig& cfg) {
  constexpr double tol = 1e-9;
  const Eigen::Vector2d& u1 = t.u[1];
  const Eigen::Vector2d d = t.u[1] - t.u[0];
  std::uint32_t m = 0;
  if (u1[0] >= cfg.rate_max[0] - tol) m |= kRightUpper;
  if (u1[0] <= cfg.rate_min[0] + tol) m |= kRightLower;
  if (u1[1] >= cfg.rate_max[1] - tol) m |= kLeftUpper;
  if (u1[1] <= cfg.rate_min[1] + tol) m |= kLeftLower;
  if (d[0] >= cfg.accel_max[0] * cfg.dt - tol) m |= kRightAccelUpper;
  if (d[0] <= cfg.accel_min[0] * cfg.dt + tol) m |= kRightAccelLower;
  if (d[1] >= cfg.accel_max[1] * cfg.dt - tol) m |= kLeftAccelUpper;
  if (d[1] <= cfg.accel_min[1] * cfg.dt + tol) m |= kLeftAccelLower;
  return m;
}

bool finite(const Trajectory& t) {
  for (const auto& x : t.x) {
    if (!x.allFinite()) return false;
  }
  for (const auto& u : t.u) {
    if (!u.allFinite()) return false;
  }
  return true;
}

}  // namespace

SolveReport solve(const NlpInstance& nlp, Trajectory& traj, const SolverOptions& opts) {
  const auto t_start = std::chrono::steady_clock::now();
  const OcpConfig& cfg = nlp.cfg;
  const int N = cfg.horizon;
  if (traj.horizon() != N || static_cast<int>(traj.x.size()) != N + 1) {
    throw std::invalid_argument("nmpc: trajectory does not match the horizon");
  }
  SolveReport rep;
  pin_initial(nlp, traj);
  clamp_controls(traj, cfg);

  double rho = opts.rho_init;
  for (int it = 0; it < opts.max_iterations; ++it) {
    if (!finite(traj)) {
      rep.status = SolveStatus::Fault;
      break;
    }
    const Linearized lin = linearize_nlp(nlp, traj);
    const QpProblem qp = build_qp(nlp, traj, lin);
    const QpResult sol = solve_qp(qp);
    if (!sol.feasible || !sol.x.allFinite()) {
      rep.status = SolveStatus::Fault;
      break;
    }
    const Eigen::VectorXd& du = sol.x;
    rep.kkt_residual = (qp.H * du).cwiseAbs().maxCoeff();

    // Merit: J + lambda'h + rho/2 |h|^2, with the Gauss-Newton model predicting J.
    const Eigen::VectorXd lam = equality_multipliers(nlp, traj, lin);
    const double h2 = lin.h.squaredNorm();
    const double lh = lam.dot(lin.h);
    const Eigen::VectorXd q = lin.rho_shift + lin.M * du;
    auto model = [&](double a, double r) {
      return 0.5 * (lin.rho + a * q).squaredNorm() + (1.0 - a) * lh + 0.5 * r * (1.0 - a) * (1.0 - a) * h2;
    };
    while (model(0.0, rho) - model(1.0, rho) <= 0.0 && rho < opts.rho_max && h2 > 0.0) rho *= 10.0;
    auto merit = [&](const Trajectory& t) {
      const Eigen::VectorXd h = trajectory_defects(nlp, t);
      return trajectory_cost(nlp, t) + lam.dot(h) + 0.5 * rho * h.squaredNorm();
    };
    const double phi0 = merit(traj);
    double alpha = 1.0;
    Trajectory best = traj;
    double best_phi = phi0;
    bool accepted = false;
    for (int ls = 0; ls < 12; ++ls, alpha *= 0.5) {
      Trajectory trial = apply_step(traj, lin, du, alpha);
      const double phi = merit(trial);
      if (!std::isfinite(phi)) continue;
      const double pred = model(0.0, rho) - model(alpha, rho);
      if (phi0 - phi >= 1e-4 * std::max(pred, 0.0) && phi <= phi0) {
        best = std::move(trial);
        accepted = true;
        break;
      }
      if (phi < best_phi) {
        best_phi = phi;
        best = std::move(trial);
      }
    }
    traj = std::move(best);
    // Rounding in the step can leave controls a hair outside the box.
    for (std::size_t k = 1; k < traj.u.size(); ++k) traj.u[k] = clip_box(traj.u[k], cfg);
    rep.iterations = it + 1;
    rep.cost_history.push_back(trajectory_cost(nlp, traj));

    const double step = du.size() > 0 ? du.cwiseAbs().maxCoeff() : 0.0;
    const double defect = trajectory_defects(nlp, traj).cwiseAbs().maxCoeff();
    // No merit decrease along a tiny step: stationary up to rounding, further iterations only repeat it.
    const bool stalled = !accepted && best_phi >= phi0 && step <= opts.stall_tol;
    if ((step <= opts.step_tol || stalled) && defect <= opts.defect_tol) {
      rep.status = SolveStatus::Converged;
      break;
    }
  }
  if (rep.status != SolveStatus::Fault && !finite(traj)) rep.status = SolveStatus::Fault;
  rep.cost = trajectory_cost(nlp, traj);
  rep.max_defect = trajectory_defects(nlp, traj).cwiseAbs().maxCoeff();
  rep.bound_violation = trajectory_violation(cfg, traj);
  rep.active_mask = active_mask(traj, cfg);
  rep.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return rep;
}

std::vector<RefSample> sample_reference(const ReferenceFn& ref, double t0, const OcpConfig& cfg) {
  std::vector<RefSample> out;
  out.reserve(static_cast<std::size_t>(cfg.horizon + 1));
  for (int k = 0; k <= cfg.horizon; ++k) out.push_back(ref(t0 + k * cfg.dt));
  return out;
}

NmpcController::NmpcController(OcpConfig cfg, int iterations_per_step, int cold_start_iterations) : cfg_(cfg) {
  cfg_.validate();
  if (iterations_per_step < 1 || cold_start_iterations < 1) throw std::invalid_argument("nmpc: iteration budgets must be >= 1");
  warm_opts_.max_iterations = iterations_per_step;
  cold_opts_.max_iterations = cold_start_iterations;
}

void NmpcController::reset() {
  warm_ = false;
  traj_ = {};
}

NmpcController::Output NmpcController::step(double t, const Pose2& x_msr, const WheelRates& rate_msr,
                                            const ReferenceFn& ref) {
  const NlpInstance nlp = transcribe(cfg_, sample_reference(ref, t, cfg_), x_msr, rate_msr);
  const SolverOptions* opts = &warm_opts_;
  if (!warm_) {
    traj_ = initial_guess(nlp);
    opts = &cold_opts_;
  } else {
    traj_ = shift_solution(traj_, t - last_t_, cfg_);
  }
  Output out;
  out.report = solve(nlp, traj_, *opts);
  if (out.report.status == SolveStatus::Fault) {
    warm_ = false;
    out.command = {std::nan(""), std::nan("")};
    return out;
  }
  warm_ = true;
  last_t_ = t;
  out.command = WheelRates::from_vec(traj_.u[1]);
  return out;
}

}  // namespace lsmr
