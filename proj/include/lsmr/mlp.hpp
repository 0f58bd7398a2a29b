#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

namespace lsmr {

struct DenseLayer {
  Eigen::MatrixXd weights;  // n_l x n_{l-1}
  Eigen::VectorXd bias;     // n_l
};

/// Scalar-in, scalar-out MLP: tanh hidden layers and a linear output layer.
struct MlpParams {
  std::vector<DenseLayer> layers;

  /// All-zero network with the given hidden sizes (empty = a single affine layer).
  static MlpParams zeros(const std::vector<int>& hidden);
  /// Uniform init in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
  static MlpParams random(const std::vector<int>& hidden, std::uint64_t seed);

  /// n_0, ..., n_{L+1}.
  std::vector<int> sizes() const;
  std::size_t parameter_count() const;

  /// Stacks each layer's weights (row-major) followed by its bias.
  Eigen::VectorXd flatten() const;
  void unflatten(const Eigen::VectorXd& w);
};

/// N_w = sum_l (n_l * n_{l-1} + n_l) for sizes n_0..n_{L+1}.
std::size_t parameter_count(const std::vector<int>& sizes);

/// Throws std::invalid_argument on non-finite input.
double forward(const MlpParams& net, double input);
Eigen::RowVectorXd forward(const MlpParams& net, const Eigen::RowVectorXd& inputs);

/// d output_p / d w_j for every sample p (P x N_w). With errors xi_p = output_p - target_p this is
/// also the Jacobian of the stacked error vector.
Eigen::MatrixXd jacobian(const MlpParams& net, const Eigen::RowVectorXd& inputs);

}  // namespace lsmr
