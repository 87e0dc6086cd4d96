#include "coverdet/siamese.hpp"

#include <algorithm>
#include <cmath>

#include "coverdet/error.hpp"

namespace coverdet {

Shape ArchitectureConfig::feature_map_shape() const {
  std::size_t h = input_bins;
  std::size_t w = input_frames;
  std::size_t channels = 1;
  for (std::size_t i = 0; i < conv_layers.size(); ++i) {
    const auto& layer = conv_layers[i];
    if (layer.kernel_h > h || layer.kernel_w > w) {
      fail(ErrorCode::kInvalidParam, "conv layer " + std::to_string(i) + " kernel " +
                                         std::to_string(layer.kernel_h) + "x" +
                                         std::to_string(layer.kernel_w) +
                                         " exceeds its input " + std::to_string(h) + "x" +
                                         std::to_string(w));
    }
    h = (h - layer.kernel_h + 1 + 1) / 2;
    w = (w - layer.kernel_w + 1 + 1) / 2;
    channels = layer.filters;
  }
  return {channels, h, w};
}

void ArchitectureConfig::validate() const {
  if (conv_layers.empty() || fc_widths.empty()) {
    fail(ErrorCode::kInvalidParam, "architecture needs at least one conv and one FC layer");
  }
  if (input_bins == 0 || input_frames == 0) {
    fail(ErrorCode::kInvalidParam, "input shape must be positive");
  }
  for (const auto& layer : conv_layers) {
    if (layer.filters == 0 || layer.kernel_h == 0 || layer.kernel_w == 0) {
      fail(ErrorCode::kInvalidParam, "conv layers need positive filters and kernel sizes");
    }
  }
  for (std::size_t width : fc_widths) {
    if (width == 0) fail(ErrorCode::kInvalidParam, "FC widths must be positive");
  }
  if (!std::isfinite(alpha_init)) {
    fail(ErrorCode::kInvalidParam, "alpha_init must be finite");
  }
  feature_map_shape();
}

namespace {

template <typename T>
BasicTensor<T> he_normal(Shape shape, std::size_t fan_in, Rng& rng) {
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
  std::vector<T> values(shape_size(shape));
  for (T& v : values) v = static_cast<T>(dist(rng));
  return BasicTensor<T>(std::move(shape), std::move(values), true);
}

// Parameter shapes in canonical order, with the L2 flag.
std::vector<std::pair<std::string, std::pair<Shape, bool>>> parameter_layout(
    const ArchitectureConfig& config) {
  std::vector<std::pair<std::string, std::pair<Shape, bool>>> layout;
  std::size_t channels = 1;
  for (std::size_t i = 0; i < config.conv_layers.size(); ++i) {
    const auto& l = config.conv_layers[i];
    const std::string prefix = "conv" + std::to_string(i);
    layout.push_back({prefix + ".kernel", {{l.filters, channels, l.kernel_h, l.kernel_w}, true}});
    layout.push_back({prefix + ".bias", {{l.filters}, false}});
    channels = l.filters;
  }
  std::size_t width = shape_size(config.feature_map_shape());
  for (std::size_t i = 0; i < config.fc_widths.size(); ++i) {
    const std::string prefix = "fc" + std::to_string(i);
    layout.push_back({prefix + ".weight", {{width, config.fc_widths[i]}, true}});
    layout.push_back({prefix + ".bias", {{config.fc_widths[i]}, false}});
    width = config.fc_widths[i];
  }
  layout.push_back({"alpha", {{config.embedding_dim()}, false}});
  return layout;
}

}  // namespace

template <typename T>
BasicSiameseModel<T> BasicSiameseModel<T>::create(const ArchitectureConfig& config,
                                                  std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  BasicSiameseModel model;
  model.config_ = config;
  for (auto& [name, entry] : parameter_layout(config)) {
    auto& [shape, decay] = entry;
    ParameterType param{name, {}, decay};
    if (name == "alpha") {
      param.tensor = TensorType(shape, std::vector<T>(shape_size(shape),
                                                      static_cast<T>(config.alpha_init)), true);
    } else if (name.ends_with(".bias")) {
      param.tensor = TensorType::zeros(shape, true);
    } else {
      const std::size_t fan_in = shape.size() == 4 ? shape[1] * shape[2] * shape[3] : shape[0];
      param.tensor = he_normal<T>(shape, fan_in, rng);
    }
    model.params_.push_back(std::move(param));
  }
  return model;
}

template <typename T>
BasicSiameseModel<T> BasicSiameseModel<T>::from_parameters(const ArchitectureConfig& config,
                                                           std::vector<ParameterType> params) {
  config.validate();
  const auto layout = parameter_layout(config);
  if (params.size() != layout.size()) {
    fail(ErrorCode::kDimMismatch, "expected " + std::to_string(layout.size()) +
                                      " parameters, got " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const auto& [name, entry] = layout[i];
    if (params[i].name != name || params[i].tensor.shape() != entry.first) {
      fail(ErrorCode::kDimMismatch, "parameter " + params[i].name + " " +
                                        shape_string(params[i].tensor.shape()) +
                                        " does not match expected " + name + " " +
                                        shape_string(entry.first));
    }
    params[i].decay = entry.second;
    if (!params[i].tensor.requires_grad()) params[i].tensor = params[i].tensor.detach(true);
  }
  BasicSiameseModel model;
  model.config_ = config;
  model.params_ = std::move(params);
  return model;
}

template <typename T>
BasicTensor<T> BasicSiameseModel<T>::embed(const TensorType& input,
                                           const ForwardMode& mode) const {
  if (input.rank() != 4 || input.dim(1) != 1 || input.dim(2) != config_.input_bins ||
      input.dim(3) != config_.input_frames) {
    fail(ErrorCode::kShapeMismatch,
         "embed expects [N,1," + std::to_string(config_.input_bins) + "," +
             std::to_string(config_.input_frames) + "], got " + shape_string(input.shape()));
  }
  const bool apply_dropout = mode.training && mode.dropout_rate > 0.0;
  if (apply_dropout && mode.rng == nullptr) {
    fail(ErrorCode::kInvalidParam, "training-mode dropout needs an rng");
  }

  std::size_t p = 0;
  TensorType x = input;
  for (std::size_t i = 0; i < config_.conv_layers.size(); ++i, p += 2) {
    x = maxpool2(relu(conv2d(x, params_[p].tensor, params_[p + 1].tensor)));
  }
  x = flatten(x);
  const std::size_t n_fc = config_.fc_widths.size();
  for (std::size_t i = 0; i < n_fc; ++i, p += 2) {
    x = dense(x, params_[p].tensor, params_[p + 1].tensor);
    if (i + 1 < n_fc) x = relu(x);
    if (apply_dropout) x = dropout(x, mode.dropout_rate, true, *mode.rng, mode.shared_mask);
  }
  return x;
}

template <typename T>
BasicSiameseModel<T> BasicSiameseModel<T>::clone() const {
  BasicSiameseModel copy;
  copy.config_ = config_;
  copy.params_.reserve(params_.size());
  for (const auto& param : params_) {
    copy.params_.push_back({param.name, param.tensor.detach(true), param.decay});
  }
  return copy;
}

template <typename T>
BasicTensor<T> compare_logit(const BasicTensor<T>& alpha, const BasicTensor<T>& v_a,
                             const BasicTensor<T>& v_b) {
  if (v_a.shape() != v_b.shape() || v_a.rank() != 1 || alpha.shape() != v_a.shape()) {
    fail(ErrorCode::kShapeMismatch, "compare: alpha " + shape_string(alpha.shape()) + ", v_a " +
                                        shape_string(v_a.shape()) + ", v_b " +
                                        shape_string(v_b.shape()));
  }
  return sum(mul(alpha, square(sub(v_a, v_b))));
}

template <typename T>
BasicTensor<T> compare(const BasicTensor<T>& alpha, const BasicTensor<T>& v_a,
                       const BasicTensor<T>& v_b) {
  return sigmoid(compare_logit(alpha, v_a, v_b));
}

template <typename T>
BasicTensor<T> bce_loss(const BasicTensor<T>& p, int label) {
  if (p.size() != 1) {
    fail(ErrorCode::kShapeMismatch, "bce_loss expects a scalar probability");
  }
  if (label != 0 && label != 1) {
    fail(ErrorCode::kInvalidParam, "label must be 0 or 1");
  }
  const T raw = p.item();
  const T lo = static_cast<T>(kProbabilityClamp);
  const T hi = static_cast<T>(1.0 - kProbabilityClamp);
  const T q = std::clamp(raw, lo, hi);
  const bool clamped = raw < lo || raw > hi;
  const T loss = label == 1 ? -std::log(q) : -std::log(T(1) - q);

  auto p_node = p.node();
  auto node = std::make_shared<detail::TensorNode<T>>();
  node->shape = Shape{};
  node->value = {loss};
  node->op = "bce_loss";
  if (p_node->requires_grad) {
    node->requires_grad = true;
    node->parents = {p_node};
    node->backward_fn = [p_node, q, clamped, label](detail::TensorNode<T>& self) {
      if (clamped) return;
      const T d = label == 1 ? -T(1) / q : T(1) / (T(1) - q);
      p_node->grad_buffer()[0] += self.grad[0] * d;
    };
  }
  return BasicTensor<T>(std::move(node));
}

template <typename T>
BasicTensor<T> spectrogram_input(const CqtSpectrogram& spec) {
  const CqtSpectrogram* one[] = {&spec};
  return stack_inputs<T>(one);
}

template <typename T>
BasicTensor<T> stack_inputs(std::span<const CqtSpectrogram* const> specs) {
  if (specs.empty()) fail(ErrorCode::kShapeMismatch, "no spectrograms to stack");
  const std::size_t bins = specs[0]->n_bins;
  const std::size_t frames = specs[0]->n_frames;
  std::vector<T> values;
  values.reserve(specs.size() * bins * frames);
  constexpr double floor_db = kLogFloorDb;
  for (const auto* spec : specs) {
    if (spec->n_bins != bins || spec->n_frames != frames) {
      fail(ErrorCode::kShapeMismatch, "spectrogram " + spec->source_id + " has shape " +
                                          std::to_string(spec->n_bins) + "x" +
                                          std::to_string(spec->n_frames) + ", expected " +
                                          std::to_string(bins) + "x" + std::to_string(frames));
    }
    for (float db : spec->data) {
      values.push_back(static_cast<T>((static_cast<double>(db) - floor_db) / -floor_db));
    }
  }
  return BasicTensor<T>(Shape{specs.size(), 1, bins, frames}, std::move(values));
}

template class BasicSiameseModel<float>;
template class BasicSiameseModel<double>;

template <typename T>
BasicTensor<T> bce_with_logits(const BasicTensor<T>& z, int label) {
  if (z.size() != 1) {
    fail(ErrorCode::kShapeMismatch, "bce_with_logits expects a scalar logit");
  }
  if (label != 0 && label != 1) {
    fail(ErrorCode::kInvalidParam, "label must be 0 or 1");
  }
  const double x = static_cast<double>(z.item());
  const double signed_x = label == 1 ? -x : x;
  const double loss = std::max(signed_x, 0.0) + std::log1p(std::exp(-std::abs(signed_x)));
  const double p = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));

  auto z_node = z.node();
  auto node = std::make_shared<detail::TensorNode<T>>();
  node->shape = Shape{};
  node->value = {static_cast<T>(loss)};
  node->op = "bce_with_logits";
  if (z_node->requires_grad) {
    node->requires_grad = true;
    node->parents = {z_node};
    const T d = static_cast<T>(p - label);
    node->backward_fn = [z_node, d](detail::TensorNode<T>& self) {
      z_node->grad_buffer()[0] += self.grad[0] * d;
    };
  }
  return BasicTensor<T>(std::move(node));
}

#define COVERDET_INSTANTIATE_SIAMESE(T)                                                  \
  template BasicTensor<T> compare(const BasicTensor<T>&, const BasicTensor<T>&,          \
                                  const BasicTensor<T>&);                                \
  template BasicTensor<T> bce_loss(const BasicTensor<T>&, int);                          \
  template BasicTensor<T> compare_logit(const BasicTensor<T>&, const BasicTensor<T>&,    \
                                        const BasicTensor<T>&);                          \
  template BasicTensor<T> bce_with_logits(const BasicTensor<T>&, int);                   \
  template BasicTensor<T> spectrogram_input<T>(const CqtSpectrogram&);                   \
  template BasicTensor<T> stack_inputs<T>(std::span<const CqtSpectrogram* const>);

COVERDET_INSTANTIATE_SIAMESE(float)
COVERDET_INSTANTIATE_SIAMESE(double)

#undef COVERDET_INSTANTIATE_SIAMESE

}  // namespace coverdet
