#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "lsmr/dataset.hpp"
#include "lsmr/mlp.hpp"

namespace lsmr {

struct Batch {
  Eigen::RowVectorXd inputs;
  Eigen::RowVectorXd targets;
};

double mse(const MlpParams& net, const Batch& batch);

/// Normal-equation pieces at the current parameters.
struct Linearization {
  Eigen::MatrixXd jtj;   // J^T J (full symmetric)
  Eigen::VectorXd jte;   // J^T xi, xi = output - target
  double mse = 0.0;
  Eigen::Index samples = 0;

  /// Gradient of the mean squared error, (2/P) J^T xi.
  Eigen::VectorXd gradient() const { return (2.0 / static_cast<double>(samples)) * jte; }
};

Linearization linearize(const MlpParams& net, const Batch& batch);

struct LmState {
  MlpParams net;
  double mu = 1e-3;
  double beta = 10.0;
  int epoch = 0;
  double train_mse = 0.0;
  double best_val_mse = 0.0;
  bool last_accepted = false;
  Eigen::VectorXd last_step;  // most recent solved step, accepted or not
  int solve_retries = 0;
};

/// Solves (J^T J + mu I) step = -J^T xi. Cholesky failure raises mu by beta, up to max_retries times;
/// mu is updated in place to the value actually used.
Eigen::VectorXd damped_step(const Linearization& lin, double& mu, double beta, int max_retries = 20,
                            int* retries = nullptr);

/// One LM trial: accept iff the batch MSE drops (then mu /= beta), else keep w and mu *= beta.
LmState lm_step(const LmState& state, const Batch& batch, const Linearization& lin);
LmState lm_step(const LmState& state, const Batch& batch);

struct TrainOptions {
  std::vector<int> hidden{35, 20, 12, 10, 8};
  double target_mse = 1e-3;
  double min_grad = 1e-4;
  int max_epochs = 200;
  int max_val_fail = 6;
  double mu_init = 1e-3;
  double beta = 10.0;
  double mu_max = 1e10;
  std::uint64_t seed = 1;
};

struct TrainReport {
  double train_mse = 0.0;
  double val_mse = 0.0;
  double test_mse = 0.0;
  int epochs = 0;
  bool converged = false;
  std::string stop_reason;
  std::vector<double> accepted_mse;  // training MSE after each accepted step
  std::vector<double> mu_history;    // mu at every trial
};

struct TrainResult {
  MlpParams net;  // best validation parameters
  TrainReport report;
};

/// Full-batch LM with early stopping on the validation split.
TrainResult train(const Dataset& ds, const TrainOptions& opts);

}  // namespace lsmr
