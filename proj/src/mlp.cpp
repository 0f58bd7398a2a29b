#include "lsmr/mlp.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace lsmr {

namespace {

std::vector<int> full_sizes(const std::vector<int>& hidden) {
  std::vector<int> sizes{1};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(1);
  for (int n : sizes) {
    if (n < 1) throw std::invalid_argument("layer sizes must be positive");
  }
  return sizes;
}

}  // namespace

MlpParams MlpParams::zeros(const std::vector<int>& hidden) {
  const auto sizes = full_sizes(hidden);
  MlpParams net;
  for (std::size_t l = 1; l < sizes.size(); ++l) {
    net.layers.push_back({Eigen::MatrixXd::Zero(sizes[l], sizes[l - 1]), Eigen::VectorXd::Zero(sizes[l])});
  }
  return net;
}

MlpParams MlpParams::random(const std::vector<int>& hidden, std::uint64_t seed) {
  MlpParams net = zeros(hidden);
  std::mt19937_64 rng(seed);
  for (DenseLayer& layer : net.layers) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer.weights.cols()));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Eigen::Index i = 0; i < layer.weights.rows(); ++i) {
      for (Eigen::Index j = 0; j < layer.weights.cols(); ++j) layer.weights(i, j) = dist(rng);
    }
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias[i] = dist(rng);
  }
  return net;
}

std::vector<int> MlpParams::sizes() const {
  std::vector<int> out;
  if (layers.empty()) return out;
  out.push_back(static_cast<int>(layers.front().weights.cols()));
  for (const DenseLayer& l : layers) out.push_back(static_cast<int>(l.weights.rows()));
  return out;
}

std::size_t parameter_count(const std::vector<int>& sizes) {
  std::size_t n = 0;
  for (std::size_t l = 1; l < sizes.size(); ++l) {
    n += static_cast<std::size_t>(sizes[l]) * sizes[l - 1] + sizes[l];
  }
  return n;
}

std::size_t MlpParams::parameter_count() const { return lsmr::parameter_count(sizes()); }

Eigen::VectorXd MlpParams::flatten() const {
  Eigen::VectorXd w(parameter_count());
  Eigen::Index k = 0;
  for (const DenseLayer& l : layers) {
    for (Eigen::Index i = 0; i < l.weights.rows(); ++i) {
      for (Eigen::Index j = 0; j < l.weights.cols(); ++j) w[k++] = l.weights(i, j);
    }
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) w[k++] = l.bias[i];
  }
  return w;
}

void MlpParams::unflatten(const Eigen::VectorXd& w) {
  if (static_cast<std::size_t>(w.size()) != parameter_count()) {
    throw std::invalid_argument("parameter vector length does not match the architecture");
  }
  Eigen::Index k = 0;
  for (DenseLayer& l : layers) {
    for (Eigen::Index i = 0; i < l.weights.rows(); ++i) {
      for (Eigen::Index j = 0; j < l.weights.cols(); ++j) l.weights(i, j) = w[k++];
    }
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias[i] = w[k++];
  }
}

double forward(const MlpParams& net, double input) {
  if (!std::isfinite(input)) throw std::invalid_argument("mlp forward: non-finite input");
  // Small fixed-size path; the batch version allocates per layer.
  Eigen::VectorXd a(1);
  a[0] = input;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    Eigen::VectorXd z = net.layers[l].weights * a + net.layers[l].bias;
    if (l + 1 < net.layers.size()) z = z.array().tanh().matrix();
    a = std::move(z);
  }
  return a[0];
}

Eigen::RowVectorXd forward(const MlpParams& net, const Eigen::RowVectorXd& inputs) {
  if (!inputs.allFinite()) throw std::invalid_argument("mlp forward: non-finite input");
  Eigen::MatrixXd a = inputs;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    Eigen::MatrixXd z = net.layers[l].weights * a;
    z.colwise() += net.layers[l].bias;
    if (l + 1 < net.layers.size()) z = z.array().tanh().matrix();
    a = std::move(z);
  }
  return a.row(0);
}

Eigen::MatrixXd jacobian(const MlpParams& net, const Eigen::RowVectorXd& inputs) {
  const std::size_t n_layers = net.layers.size();
  const Eigen::Index p = inputs.size();

  // Forward pass, keeping every activation a^(0..L+1).
  std::vector<Eigen::MatrixXd> act;
  act.reserve(n_layers + 1);
  act.emplace_back(inputs);
  for (std::size_t l = 0; l < n_layers; ++l) {
    Eigen::MatrixXd z = net.layers[l].weights * act.back();
    z.colwise() += net.layers[l].bias;
    if (l + 1 < n_layers) z = z.array().tanh().matrix();
    act.push_back(std::move(z));
  }

  // Column offsets of each layer inside the flattened parameter vector.
  std::vector<Eigen::Index> offset(n_layers);
  Eigen::Index total = 0;
  for (std::size_t l = 0; l < n_layers; ++l) {
    offset[l] = total;
    total += net.layers[l].weights.size() + net.layers[l].bias.size();
  }

  Eigen::MatrixXd jac(p, total);
  // delta = d output / d z^(l), one column per sample; the output layer is linear.
  Eigen::MatrixXd delta = Eigen::MatrixXd::Ones(1, p);
  for (std::size_t li = n_layers; li-- > 0;) {
    const DenseLayer& layer = net.layers[li];
    const Eigen::MatrixXd& prev = act[li];
    const Eigen::Index rows = layer.weights.rows();
    const Eigen::Index cols = layer.weights.cols();
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index j = 0; j < cols; ++j) {
        jac.col(offset[li] + i * cols + j) = delta.row(i).cwiseProduct(prev.row(j)).transpose();
      }
      jac.col(offset[li] + rows * cols + i) = delta.row(i).transpose();
    }
    if (li > 0) {
      // prev holds tanh(z^(li-1)); its derivative is 1 - a^2.
      delta = (layer.weights.transpose() * delta).cwiseProduct((1.0 - prev.array().square()).matrix());
    }
  }
  return jac;
}

}  // namespace lsmr
