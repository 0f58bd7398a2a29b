#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <limits>
#include <string_view>
#include <vector>

#include "lsmr/se2.hpp"

namespace lsmr {

struct OcpConfig {
  int horizon = 20;  // N
  double dt = 0.05;
  Eigen::Vector3d q_x{20.0, 20.0, 12.0};
  Eigen::Vector3d q_xdot{0.0, 0.0, 0.0};
  Eigen::Vector3d q_xN{20.0, 20.0, 12.0};
  Eigen::Vector3d q_xdotN{0.0, 0.0, 0.0};
  Eigen::Vector2d r_bar{0.2, 0.2};
  Eigen::Vector3d x_min = Eigen::Vector3d::Constant(-std::numeric_limits<double>::infinity());
  Eigen::Vector3d x_max = Eigen::Vector3d::Constant(std::numeric_limits<double>::infinity());
  Eigen::Vector2d rate_min{0.0, 0.0};
  Eigen::Vector2d rate_max{0.8, 0.8};
  Eigen::Vector2d accel_min{-0.2, -0.2};
  Eigen::Vector2d accel_max{0.2, 0.2};
  Integrator integrator = Integrator::RK4;
  RobotGeometry geometry;

  void validate() const;
};

/// Index map of z = [x_0 u_0 x_1 u_1 ... x_{N-1} u_{N-1} x_N].
struct DecisionLayout {
  int N = 20;

  int size() const { return 5 * N + 3; }
  int state(int k, int c) const { return 5 * k + c; }
  int control(int k, int c) const { return 5 * k + 3 + c; }
};

/// States (yaw unwrapped) and controls over the horizon.
struct Trajectory {
  std::vector<Eigen::Vector3d> x;  // N + 1
  std::vector<Eigen::Vector2d> u;  // N

  int horizon() const { return static_cast<int>(u.size()); }
  Eigen::VectorXd flatten() const;
  static Trajectory unflatten(const Eigen::VectorXd& z, int N);
};

/// Reference pose and pose rate at one time.
struct RefSample {
  Pose2 pose;
  Eigen::Vector3d rate = Eigen::Vector3d::Zero();
};

using ReferenceFn = std::function<RefSample(double)>;

struct NlpInstance {
  OcpConfig cfg;
  std::vector<RefSample> ref;  // N + 1 samples on the grid
  Pose2 x_msr;
  WheelRates rate_msr;
};

/// Errors if the reference does not cover N + 1 grid points.
NlpInstance transcribe(const OcpConfig& cfg, const std::vector<RefSample>& ref, const Pose2& x_msr,
                       const WheelRates& rate_msr);

/// One integration step x_{k+1} = int(x_k, f(x_k, u_k), dt) without yaw wrapping, with optional Jacobians.
Eigen::Vector3d shooting_step(const Eigen::Vector3d& x, const Eigen::Vector2d& u, const RobotGeometry& geom,
                              double dt, Integrator scheme, Eigen::Matrix3d* A = nullptr,
                              Eigen::Matrix<double, 3, 2>* B = nullptr);

/// J = 1/2 sum_{k=1}^{N-1} L_k + L_N with wrapped yaw errors. The terminal rate term uses u_{N-1}.
double cost(const NlpInstance& nlp, const Eigen::VectorXd& z);
Eigen::VectorXd cost_gradient(const NlpInstance& nlp, const Eigen::VectorXd& z);
/// x_{k+1} - int(x_k, u_k), stacked (3N).
Eigen::VectorXd defects(const NlpInstance& nlp, const Eigen::VectorXd& z);
/// Largest violation of box, rate and state bounds (rate bounds on stages 0..N-2).
double bound_violation(const NlpInstance& nlp, const Eigen::VectorXd& z);

enum class SolveStatus { Converged, RealtimePartial, Fault };
std::string_view to_string(SolveStatus s);

/// Active-bound bits for the emitted control (stage 1).
enum ActiveBit : std::uint32_t {
  kRightUpper = 1u << 0,
  kRightLower = 1u << 1,
  kLeftUpper = 1u << 2,
  kLeftLower = 1u << 3,
  kRightAccelUpper = 1u << 4,
  kRightAccelLower = 1u << 5,
  kLeftAccelUpper = 1u << 6,
  kLeftAccelLower = 1u << 7,
};

struct SolveReport {
  int iterations = 0;
  double cost = 0.0;
  double max_defect = 0.0;
  double bound_violation = 0.0;
  double kkt_residual = 0.0;
  double wall_time_s = 0.0;
  SolveStatus status = SolveStatus::RealtimePartial;
  std::uint32_t active_mask = 0;
  std::vector<double> cost_history;  // cost after each iteration
};

struct SolverOptions {
  int max_iterations = 1;
  double step_tol = 1e-9;    // converged when the max control step falls below this
  double defect_tol = 1e-6;
  double stall_tol = 1e-6;  // also converged when the line search cannot improve a step this small
  double rho_init = 10.0;
  double rho_max = 1e8;
};

/// Gauss-Newton SQP on the condensed problem; z is the start point and receives the iterate.
/// Stage-0 state and control are pinned to the measurements (the control clipped into its box).
SolveReport solve(const NlpInstance& nlp, Trajectory& traj, const SolverOptions& opts);

/// Fills z from the measurement and the reference twist; zero defects, bounds satisfied.
Trajectory initial_guess(const NlpInstance& nlp);

/// Re-times a solution by `elapsed` seconds: linear interpolation between stages, the last control held.
Trajectory shift_solution(const Trajectory& traj, double elapsed, const OcpConfig& cfg);

/// Makes controls feasible going forward from a pinned u_0.
void clamp_controls(Trajectory& traj, const OcpConfig& cfg);

/// Receding-horizon wrapper: warm-started single-iteration solves.
class NmpcController {
 public:
  NmpcController(OcpConfig cfg, int iterations_per_step = 1, int cold_start_iterations = 50);

  struct Output {
    WheelRates command;  // stage-1 control of the current iterate
    SolveReport report;
  };

  Output step(double t, const Pose2& x_msr, const WheelRates& rate_msr, const ReferenceFn& ref);
  void reset();

  const Trajectory& solution() const { return traj_; }
  const OcpConfig& config() const { return cfg_; }
  bool warm() const { return warm_; }

 private:
  OcpConfig cfg_;
  SolverOptions warm_opts_;
  SolverOptions cold_opts_;
  Trajectory traj_;
  double last_t_ = 0.0;
  bool warm_ = false;
};

std::vector<RefSample> sample_reference(const ReferenceFn& ref, double t0, const OcpConfig& cfg);

}  // namespace lsmr
