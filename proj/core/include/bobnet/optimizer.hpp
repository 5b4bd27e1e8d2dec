#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "bobnet/rng.hpp"
#include "bobnet/tensor.hpp"

namespace bobnet {

// Training hyperparameters. Defaults are the reference schedule: lr 0.01
// decayed by 10x every 10 epochs over 30 epochs, Nesterov momentum 0.9,
// L2 weight 5e-4 on weights, 50% dropout on the hidden FC layers, batch 64.
struct OptimizerConfig {
  double base_lr = 0.01;
  double decay_factor = 10.0;
  int decay_every_epochs = 10;
  double momentum = 0.9;
  double l2_weight = 5e-4;
  int epochs = 30;
  double dropout_rate = 0.5;
  int batch_size = 64;

  // epoch is 1-based: lr(e) = base_lr / decay_factor^floor((e-1)/decay_every).
  double learning_rate(int epoch) const {
    if (epoch < 1) throw std::invalid_argument("learning_rate: epoch must be >= 1");
    const int steps = (epoch - 1) / decay_every_epochs;
    return base_lr / std::pow(decay_factor, steps);
  }
};

// Nesterov momentum update:
//   v <- momentum*v - lr*g
//   w <- w + momentum*v - lr*g
template <typename T>
void nesterov_step(Tensor<T>& param, Tensor<T>& velocity, const Tensor<T>& grad, double lr, double momentum) {
  if (!param.same_shape(velocity) || !param.same_shape(grad))
    throw std::invalid_argument("nesterov_step: parameter, velocity and gradient shapes must agree");
  const T mu = static_cast<T>(momentum);
  const T eta = static_cast<T>(lr);
  for (std::size_t i = 0; i < param.numel(); ++i) {
    const T g = grad[i];
    if (!std::isfinite(static_cast<double>(g))) throw std::runtime_error("nesterov_step: non-finite gradient");
    velocity[i] = mu * velocity[i] - eta * g;
    param[i] += mu * velocity[i] - eta * g;
  }
}

// Glorot-uniform initialization, U[-b, b] with b = sqrt(6/(fan_in+fan_out)).
// Rank-4 shapes are conv kernels whose fans include the 3x3 receptive field;
// rank-2 shapes are fully-connected weights. Biases are zero-initialized
// elsewhere and never drawn from this distribution.
template <typename T>
Tensor<T> glorot_uniform_init(const std::vector<std::size_t>& shape, Rng& rng) {
  std::size_t fan_in = 0, fan_out = 0;
  if (shape.size() == 2) {
    fan_out = shape[0];
    fan_in = shape[1];
  } else if (shape.size() == 4) {
    const std::size_t receptive = shape[2] * shape[3];
    fan_out = shape[0] * receptive;
    fan_in = shape[1] * receptive;
  } else {
    throw std::invalid_argument("glorot_uniform_init: shape must be rank 2 or rank 4");
  }
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor<T> t(shape);
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = static_cast<T>(rng.uniform(-bound, bound));
  return t;
}

}  // namespace bobnet
