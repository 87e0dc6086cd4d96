#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "coverdet/cqt.hpp"
#include "coverdet/ops.hpp"
#include "coverdet/optim.hpp"
#include "coverdet/random.hpp"
#include "coverdet/tensor.hpp"

namespace coverdet {

struct ConvLayerSpec {
  std::size_t filters = 0;
  std::size_t kernel_h = 3;
  std::size_t kernel_w = 3;

  bool operator==(const ConvLayerSpec&) const = default;
};

/// Layer stack of the shared feature extractor. Each conv layer is followed by
/// relu and 2x2 max pooling; each FC layer but the last by relu. Dropout
/// follows every FC layer during training. The last FC layer's output is the
/// embedding fed to the comparison head.
struct ArchitectureConfig {
  std::vector<ConvLayerSpec> conv_layers{{64, 5, 5}, {32, 3, 3}, {16, 3, 3}};
  std::vector<std::size_t> fc_widths{128, 64};
  std::size_t input_bins = kCqtBins;
  std::size_t input_frames = kDefaultInputFrames;
  /// Initial value of every comparison weight. Negative, so that p rises as
  /// the pair distance falls.
  double alpha_init = -0.02;

  std::size_t embedding_dim() const { return fc_widths.empty() ? 0 : fc_widths.back(); }
  /// [filters, h, w] after the last conv/pool block.
  Shape feature_map_shape() const;
  void validate() const;

  bool operator==(const ArchitectureConfig&) const = default;
};

struct ForwardMode {
  bool training = false;
  double dropout_rate = 0.5;
  Rng* rng = nullptr;  // required when training with dropout_rate > 0
  // One dropout mask for every row of the batch. Training feeds the two
  // tracks of a pair as one batch, so both see the same thinned network.
  bool shared_mask = false;
};

/// Twin feature extractor f plus the comparison weights alpha. There is one
/// parameter set; both inputs of a pair go through the same tensors.
template <typename T>
class BasicSiameseModel {
 public:
  using TensorType = BasicTensor<T>;
  using ParameterType = BasicParameter<T>;

  /// He-initialized weights (normal, std sqrt(2 / fan_in)), zero biases,
  /// alpha filled with config.alpha_init.
  static BasicSiameseModel create(const ArchitectureConfig& config, std::uint64_t seed);

  /// Rebuilds a model from named parameters (e.g. a checkpoint). Shapes must
  /// match `config`.
  static BasicSiameseModel from_parameters(const ArchitectureConfig& config,
                                           std::vector<ParameterType> params);

  /// [N,1,bins,frames] -> [N, embedding_dim]: the penultimate representation.
  TensorType embed(const TensorType& input, const ForwardMode& mode = {}) const;

  const ArchitectureConfig& config() const { return config_; }
  std::span<ParameterType> parameters() { return params_; }
  std::span<const ParameterType> parameters() const { return params_; }
  const TensorType& alpha() const { return params_.back().tensor; }

  /// Deep copy with fresh leaves (independent gradients), for per-worker
  /// replicas in data-parallel training.
  BasicSiameseModel clone() const;

 private:
  BasicSiameseModel() = default;

  ArchitectureConfig config_;
  std::vector<ParameterType> params_;  // conv*, fc*, then alpha
};

using SiameseModel = BasicSiameseModel<float>;

/// p = sigmoid(sum_j alpha_j (v_a_j - v_b_j)^2), a scalar in (0, 1).
template <typename T>
BasicTensor<T> compare(const BasicTensor<T>& alpha, const BasicTensor<T>& v_a,
                       const BasicTensor<T>& v_b);

/// The head's logit z = sum_j alpha_j (v_a_j - v_b_j)^2, so compare = sigmoid(z).
template <typename T>
BasicTensor<T> compare_logit(const BasicTensor<T>& alpha, const BasicTensor<T>& v_a,
                             const BasicTensor<T>& v_b);

inline constexpr double kProbabilityClamp = 1e-7;

/// Binary cross-entropy -[y log p + (1-y) log(1-p)] with p clamped to
/// [1e-7, 1-1e-7]. Inside the clamp the gradient is exact; outside it is 0.
template <typename T>
BasicTensor<T> bce_loss(const BasicTensor<T>& p, int label);

/// bce_loss(sigmoid(z), label) computed from the logit without clamping:
/// softplus(-z) for covers, softplus(z) otherwise. The gradient sigmoid(z) - y
/// stays informative when the head saturates, which the clamped form does not.
template <typename T>
BasicTensor<T> bce_with_logits(const BasicTensor<T>& z, int label);

/// Network input for a spectrogram: [1, 1, n_bins, n_frames], with dB values
/// mapped from [kLogFloorDb, 0] to [0, 1].
template <typename T>
BasicTensor<T> spectrogram_input(const CqtSpectrogram& spec);

/// Stacks inputs of equal shape along the batch axis.
template <typename T>
BasicTensor<T> stack_inputs(std::span<const CqtSpectrogram* const> specs);

extern template class BasicSiameseModel<float>;
extern template class BasicSiameseModel<double>;

}  // namespace coverdet
