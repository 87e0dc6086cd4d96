#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "coverdet/tensor.hpp"

namespace coverdet {

/// A learnable tensor. `decay` selects whether the L2 penalty applies.
template <typename T>
struct BasicParameter {
  std::string name;
  BasicTensor<T> tensor;
  bool decay = true;
};

using Parameter = BasicParameter<float>;

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double l2_lambda = 0.0;
};

struct AdamState {
  AdamConfig config;
  std::uint64_t step = 0;
  std::vector<std::vector<float>> m;
  std::vector<std::vector<float>> v;
};

AdamState make_adam_state(std::span<const Parameter> params, const AdamConfig& config);

/// One ADAM update. For each parameter:
///   g = grad + l2_lambda * param          (decayed parameters only)
///   m = b1 m + (1-b1) g,  v = b2 v + (1-b2) g^2
///   param -= lr * m_hat / (sqrt(v_hat) + eps)
/// with bias corrections m_hat = m / (1-b1^t), v_hat = v / (1-b2^t).
/// `grads[i]` must have the size of `params[i]`.
void adam_step(std::span<Parameter> params, std::span<const std::vector<float>> grads,
               AdamState& state);

}  // namespace coverdet
