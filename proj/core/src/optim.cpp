#include "coverdet/optim.hpp"

#include <cmath>

#include "coverdet/error.hpp"

namespace coverdet {

AdamState make_adam_state(std::span<const Parameter> params, const AdamConfig& config) {
  AdamState state;
  state.config = config;
  for (const auto& p : params) {
    state.m.emplace_back(p.tensor.size(), 0.0f);
    state.v.emplace_back(p.tensor.size(), 0.0f);
  }
  return state;
}

void adam_step(std::span<Parameter> params, std::span<const std::vector<float>> grads,
               AdamState& state) {
  if (grads.size() != params.size() || state.m.size() != params.size() ||
      state.v.size() != params.size()) {
    fail(ErrorCode::kShapeMismatch, "adam_step: parameter, gradient and moment counts differ");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::size_t n = params[i].tensor.size();
    if (grads[i].size() != n || state.m[i].size() != n || state.v[i].size() != n) {
      fail(ErrorCode::kShapeMismatch, "adam_step: size mismatch on " + params[i].name);
    }
  }

  const auto& cfg = state.config;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(cfg.beta1, t);
  const double correction2 = 1.0 - std::pow(cfg.beta2, t);

  for (std::size_t i = 0; i < params.size(); ++i) {
    auto values = params[i].tensor.mutable_values();
    const auto& g = grads[i];
    auto& m = state.m[i];
    auto& v = state.v[i];
    const double l2 = params[i].decay ? cfg.l2_lambda : 0.0;
    for (std::size_t j = 0; j < values.size(); ++j) {
      const double grad = static_cast<double>(g[j]) + l2 * values[j];
      const double mj = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * grad;
      const double vj = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * grad * grad;
      m[j] = static_cast<float>(mj);
      v[j] = static_cast<float>(vj);
      const double update = cfg.lr * (mj / correction1) / (std::sqrt(vj / correction2) + cfg.eps);
      values[j] = static_cast<float>(values[j] - update);
      if (!std::isfinite(values[j])) {
        fail(ErrorCode::kNumericalFault, "adam_step produced a non-finite value in " +
                                             params[i].name);
      }
    }
  }
}

}  // namespace coverdet
