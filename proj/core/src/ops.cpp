#include "coverdet/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "coverdet/error.hpp"

namespace coverdet {
namespace {

template <typename T>
using NodePtr = std::shared_ptr<detail::TensorNode<T>>;

template <typename T>
using BackwardFn = std::function<void(detail::TensorNode<T>&)>;

// Wraps a freshly computed value into a graph node. Parents and the backward
// closure are kept only when some input needs a gradient.
template <typename T>
BasicTensor<T> make_result(const char* op, Shape shape, std::vector<T> values,
                           std::vector<NodePtr<T>> parents, BackwardFn<T> backward) {
  for (T v : values) {
    if (!std::isfinite(v)) {
      fail(ErrorCode::kNumericalFault, std::string(op) + " produced a non-finite value");
    }
  }
  auto node = std::make_shared<detail::TensorNode<T>>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->op = op;
  const bool needs_grad = std::any_of(parents.begin(), parents.end(),
                                      [](const auto& p) { return p->requires_grad; });
  if (needs_grad) {
    node->requires_grad = true;
    node->parents = std::move(parents);
    node->backward_fn = std::move(backward);
  }
  return BasicTensor<T>(std::move(node));
}

void require(bool ok, const char* op, const std::string& what) {
  if (!ok) fail(ErrorCode::kShapeMismatch, std::string(op) + ": " + what);
}

template <typename T>
void require_same_shape(const BasicTensor<T>& a, const BasicTensor<T>& b, const char* op) {
  require(a.shape() == b.shape(), op,
          shape_string(a.shape()) + " vs " + shape_string(b.shape()));
}

}  // namespace

template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicTensor<T>& kernels,
                      const BasicTensor<T>& bias) {
  constexpr const char* op = "conv2d";
  require(input.rank() == 4, op, "input must be [N,C,H,W], got " + shape_string(input.shape()));
  require(kernels.rank() == 4, op,
          "kernels must be [F,C,kh,kw], got " + shape_string(kernels.shape()));
  const std::size_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  const std::size_t f = kernels.dim(0), kh = kernels.dim(2), kw = kernels.dim(3);
  require(kernels.dim(1) == c, op, "channel count differs between input and kernels");
  require(bias.shape() == Shape{f}, op, "bias must be [" + std::to_string(f) + "]");
  require(kh >= 1 && kw >= 1 && kh <= h && kw <= w, op, "kernel larger than input");
  const std::size_t oh = h - kh + 1, ow = w - kw + 1;

  const T* in = input.values().data();
  const T* k = kernels.values().data();
  const T* b = bias.values().data();
  std::vector<T> out(n * f * oh * ow);
  std::vector<double> acc(oh * ow);

  for (std::size_t ni = 0; ni < n; ++ni) {
    for (std::size_t fi = 0; fi < f; ++fi) {
      std::fill(acc.begin(), acc.end(), static_cast<double>(b[fi]));
      for (std::size_t ci = 0; ci < c; ++ci) {
        const T* plane = in + (ni * c + ci) * h * w;
        const T* kern = k + (fi * c + ci) * kh * kw;
        for (std::size_t i = 0; i < kh; ++i) {
          for (std::size_t j = 0; j < kw; ++j) {
            const double kv = kern[i * kw + j];
            for (std::size_t y = 0; y < oh; ++y) {
              const T* src = plane + (y + i) * w + j;
              double* dst = acc.data() + y * ow;
              for (std::size_t x = 0; x < ow; ++x) dst[x] += kv * src[x];
            }
          }
        }
      }
      T* o = out.data() + (ni * f + fi) * oh * ow;
      for (std::size_t i = 0; i < oh * ow; ++i) o[i] = static_cast<T>(acc[i]);
    }
  }

  auto in_node = input.node();
  auto k_node = kernels.node();
  auto b_node = bias.node();
  return make_result<T>(
      op, Shape{n, f, oh, ow}, std::move(out), {in_node, k_node, b_node},
      [=](detail::TensorNode<T>& self) {
        const T* g = self.grad.data();
        const T* in_v = in_node->value.data();
        const T* k_v = k_node->value.data();
        T* g_in = in_node->grad_buffer();
        T* g_k = k_node->grad_buffer();
        T* g_b = b_node->grad_buffer();

        if (g_b) {
          for (std::size_t fi = 0; fi < f; ++fi) {
            double s = 0.0;
            for (std::size_t ni = 0; ni < n; ++ni) {
              const T* gp = g + (ni * f + fi) * oh * ow;
              for (std::size_t i = 0; i < oh * ow; ++i) s += gp[i];
            }
            g_b[fi] += static_cast<T>(s);
          }
        }
        if (g_k) {
          for (std::size_t fi = 0; fi < f; ++fi) {
            for (std::size_t ci = 0; ci < c; ++ci) {
              for (std::size_t i = 0; i < kh; ++i) {
                for (std::size_t j = 0; j < kw; ++j) {
                  double s = 0.0;
                  for (std::size_t ni = 0; ni < n; ++ni) {
                    const T* gp = g + (ni * f + fi) * oh * ow;
                    const T* plane = in_v + (ni * c + ci) * h * w;
                    for (std::size_t y = 0; y < oh; ++y) {
                      const T* src = plane + (y + i) * w + j;
                      const T* gr = gp + y * ow;
                      T row = T(0);
                      for (std::size_t x = 0; x < ow; ++x) row += gr[x] * src[x];
                      s += row;
                    }
                  }
                  g_k[((fi * c + ci) * kh + i) * kw + j] += static_cast<T>(s);
                }
              }
            }
          }
        }
        if (g_in) {
          for (std::size_t ni = 0; ni < n; ++ni) {
            for (std::size_t fi = 0; fi < f; ++fi) {
              const T* gp = g + (ni * f + fi) * oh * ow;
              for (std::size_t ci = 0; ci < c; ++ci) {
                T* plane = g_in + (ni * c + ci) * h * w;
                const T* kern = k_v + (fi * c + ci) * kh * kw;
                for (std::size_t i = 0; i < kh; ++i) {
                  for (std::size_t j = 0; j < kw; ++j) {
                    const T kv = kern[i * kw + j];
                    for (std::size_t y = 0; y < oh; ++y) {
                      T* dst = plane + (y + i) * w + j;
                      const T* gr = gp + y * ow;
                      for (std::size_t x = 0; x < ow; ++x) dst[x] += kv * gr[x];
                    }
                  }
                }
              }
            }
          }
        }
      });
}

template <typename T>
BasicTensor<T> maxpool2(const BasicTensor<T>& input) {
  constexpr const char* op = "maxpool2";
  require(input.rank() == 4, op, "input must be [N,C,H,W], got " + shape_string(input.shape()));
  const std::size_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  const std::size_t oh = (h + 1) / 2, ow = (w + 1) / 2;
  const T* in = input.values().data();

  std::vector<T> out(n * c * oh * ow);
  std::vector<std::size_t> argmax(out.size());
  for (std::size_t p = 0; p < n * c; ++p) {
    const T* plane = in + p * h * w;
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x) {
        std::size_t best = (2 * y) * w + 2 * x;
        for (std::size_t dy = 0; dy < 2; ++dy) {
          for (std::size_t dx = 0; dx < 2; ++dx) {
            const std::size_t yy = 2 * y + dy, xx = 2 * x + dx;
            if (yy >= h || xx >= w) continue;
            const std::size_t idx = yy * w + xx;
            if (plane[idx] > plane[best]) best = idx;
          }
        }
        const std::size_t o = (p * oh + y) * ow + x;
        out[o] = plane[best];
        argmax[o] = p * h * w + best;
      }
    }
  }

  auto in_node = input.node();
  return make_result<T>(op, Shape{n, c, oh, ow}, std::move(out), {in_node},
                        [in_node, argmax = std::move(argmax)](detail::TensorNode<T>& self) {
                          T* g_in = in_node->grad_buffer();
                          for (std::size_t i = 0; i < argmax.size(); ++i) {
                            g_in[argmax[i]] += self.grad[i];
                          }
                        });
}

template <typename T>
BasicTensor<T> dense(const BasicTensor<T>& input, const BasicTensor<T>& weight,
                     const BasicTensor<T>& bias) {
  constexpr const char* op = "dense";
  require(input.rank() == 2, op, "input must be [N,D], got " + shape_string(input.shape()));
  require(weight.rank() == 2 && weight.dim(0) == input.dim(1), op,
          "weight " + shape_string(weight.shape()) + " incompatible with input " +
              shape_string(input.shape()));
  const std::size_t n = input.dim(0), d = input.dim(1), k = weight.dim(1);
  require(bias.shape() == Shape{k}, op, "bias must be [" + std::to_string(k) + "]");

  const T* x = input.values().data();
  const T* wv = weight.values().data();
  const T* b = bias.values().data();
  std::vector<T> out(n * k);
  std::vector<double> acc(k);
  for (std::size_t ni = 0; ni < n; ++ni) {
    for (std::size_t j = 0; j < k; ++j) acc[j] = b[j];
    for (std::size_t i = 0; i < d; ++i) {
      const double xv = x[ni * d + i];
      if (xv == 0.0) continue;
      const T* row = wv + i * k;
      for (std::size_t j = 0; j < k; ++j) acc[j] += xv * row[j];
    }
    for (std::size_t j = 0; j < k; ++j) out[ni * k + j] = static_cast<T>(acc[j]);
  }

  auto x_node = input.node();
  auto w_node = weight.node();
  auto b_node = bias.node();
  return make_result<T>(
      op, Shape{n, k}, std::move(out), {x_node, w_node, b_node},
      [=](detail::TensorNode<T>& self) {
        const T* g = self.grad.data();
        if (T* g_b = b_node->grad_buffer()) {
          for (std::size_t j = 0; j < k; ++j) {
            double s = 0.0;
            for (std::size_t ni = 0; ni < n; ++ni) s += g[ni * k + j];
            g_b[j] += static_cast<T>(s);
          }
        }
        if (T* g_w = w_node->grad_buffer()) {
          const T* xv = x_node->value.data();
          for (std::size_t i = 0; i < d; ++i) {
            for (std::size_t ni = 0; ni < n; ++ni) {
              const T xi = xv[ni * d + i];
              if (xi == T(0)) continue;
              for (std::size_t j = 0; j < k; ++j) g_w[i * k + j] += xi * g[ni * k + j];
            }
          }
        }
        if (T* g_x = x_node->grad_buffer()) {
          const T* wv2 = w_node->value.data();
          for (std::size_t ni = 0; ni < n; ++ni) {
            for (std::size_t i = 0; i < d; ++i) {
              double s = 0.0;
              const T* row = wv2 + i * k;
              for (std::size_t j = 0; j < k; ++j) s += static_cast<double>(row[j]) * g[ni * k + j];
              g_x[ni * d + i] += static_cast<T>(s);
            }
          }
        }
      });
}

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& x) {
  std::vector<T> out(x.values().begin(), x.values().end());
  for (T& v : out) v = v > T(0) ? v : T(0);
  auto x_node = x.node();
  return make_result<T>("relu", x.shape(), std::move(out), {x_node},
                        [x_node](detail::TensorNode<T>& self) {
                          T* g = x_node->grad_buffer();
                          for (std::size_t i = 0; i < self.grad.size(); ++i) {
                            if (x_node->value[i] > T(0)) g[i] += self.grad[i];
                          }
                        });
}

template <typename T>
BasicTensor<T> sigmoid(const BasicTensor<T>& x) {
  std::vector<T> out(x.size());
  const auto xv = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const T v = xv[i];
    if (v >= T(0)) {
      out[i] = T(1) / (T(1) + std::exp(-v));
    } else {
      const T e = std::exp(v);
      out[i] = e / (T(1) + e);
    }
  }
  auto x_node = x.node();
  return make_result<T>("sigmoid", x.shape(), std::move(out), {x_node},
                        [x_node](detail::TensorNode<T>& self) {
                          T* g = x_node->grad_buffer();
                          for (std::size_t i = 0; i < self.grad.size(); ++i) {
                            const T s = self.value[i];
                            g[i] += self.grad[i] * s * (T(1) - s);
                          }
                        });
}

template <typename T>
BasicTensor<T> dropout(const BasicTensor<T>& x, double rate, bool training, Rng& rng,
                       bool shared_rows) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    fail(ErrorCode::kInvalidParam, "dropout rate must be in [0, 1), got " + std::to_string(rate));
  }
  if (!training || rate == 0.0) return x;

  const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
  const std::size_t drawn = shared_rows && x.rank() > 0 ? x.size() / x.dim(0) : x.size();
  std::vector<T> mask(x.size());
  for (std::size_t i = 0; i < drawn; ++i) {
    // 53-bit uniform in [0, 1); avoids implementation-defined distributions.
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    mask[i] = u >= rate ? keep_scale : T(0);
  }
  for (std::size_t i = drawn; i < mask.size(); ++i) mask[i] = mask[i % drawn];
  std::vector<T> out(x.size());
  const auto xv = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] * mask[i];
  auto x_node = x.node();
  return make_result<T>("dropout", x.shape(), std::move(out), {x_node},
                        [x_node, mask = std::move(mask)](detail::TensorNode<T>& self) {
                          T* g = x_node->grad_buffer();
                          for (std::size_t i = 0; i < mask.size(); ++i) {
                            g[i] += self.grad[i] * mask[i];
                          }
                        });
}

template <typename T>
BasicTensor<T> reshape(const BasicTensor<T>& x, Shape shape) {
  require(shape_size(shape) == x.size(), "reshape",
          shape_string(x.shape()) + " -> " + shape_string(shape));
  auto x_node = x.node();
  return make_result<T>("reshape", std::move(shape),
                        std::vector<T>(x.values().begin(), x.values().end()), {x_node},
                        [x_node](detail::TensorNode<T>& self) {
                          T* g = x_node->grad_buffer();
                          for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
                        });
}

template <typename T>
BasicTensor<T> flatten(const BasicTensor<T>& x) {
  require(x.rank() >= 1, "flatten", "needs a batch axis");
  const std::size_t n = x.dim(0);
  return reshape(x, Shape{n, n == 0 ? 0 : x.size() / n});
}

template <typename T>
BasicTensor<T> select_row(const BasicTensor<T>& x, std::size_t index) {
  require(x.rank() == 2 && index < x.dim(0), "select_row",
          "row " + std::to_string(index) + " of " + shape_string(x.shape()));
  const std::size_t d = x.dim(1);
  const auto first = x.values().begin() + static_cast<std::ptrdiff_t>(index * d);
  auto x_node = x.node();
  return make_result<T>("select_row", Shape{d}, std::vector<T>(first, first + static_cast<std::ptrdiff_t>(d)),
                        {x_node}, [x_node, index, d](detail::TensorNode<T>& self) {
                          T* g = x_node->grad_buffer() + index * d;
                          for (std::size_t i = 0; i < d; ++i) g[i] += self.grad[i];
                        });
}

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_same_shape(a, b, "add");
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] + b.values()[i];
  auto an = a.node();
  auto bn = b.node();
  return make_result<T>("add", a.shape(), std::move(out), {an, bn},
                        [an, bn](detail::TensorNode<T>& self) {
                          if (T* g = an->grad_buffer()) {
                            for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
                          }
                          if (T* g = bn->grad_buffer()) {
                            for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
                          }
                        });
}

template <typename T>
BasicTensor<T> sub(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_same_shape(a, b, "sub");
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] - b.values()[i];
  auto an = a.node();
  auto bn = b.node();
  return make_result<T>("sub", a.shape(), std::move(out), {an, bn},
                        [an, bn](detail::TensorNode<T>& self) {
                          if (T* g = an->grad_buffer()) {
                            for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
                          }
                          if (T* g = bn->grad_buffer()) {
                            for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] -= self.grad[i];
                          }
                        });
}

template <typename T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_same_shape(a, b, "mul");
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * b.values()[i];
  auto an = a.node();
  auto bn = b.node();
  return make_result<T>("mul", a.shape(), std::move(out), {an, bn},
                        [an, bn](detail::TensorNode<T>& self) {
                          if (T* g = an->grad_buffer()) {
                            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                              g[i] += self.grad[i] * bn->value[i];
                            }
                          }
                          if (T* g = bn->grad_buffer()) {
                            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                              g[i] += self.grad[i] * an->value[i];
                            }
                          }
                        });
}

template <typename T>
BasicTensor<T> square(const BasicTensor<T>& x) {
  std::vector<T> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.values()[i] * x.values()[i];
  auto xn = x.node();
  return make_result<T>("square", x.shape(), std::move(out), {xn},
                        [xn](detail::TensorNode<T>& self) {
                          T* g = xn->grad_buffer();
                          for (std::size_t i = 0; i < self.grad.size(); ++i) {
                            g[i] += T(2) * xn->value[i] * self.grad[i];
                          }
                        });
}

template <typename T>
BasicTensor<T> scale(const BasicTensor<T>& x, T factor) {
  std::vector<T> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.values()[i] * factor;
  auto xn = x.node();
  return make_result<T>("scale", x.shape(), std::move(out), {xn},
                        [xn, factor](detail::TensorNode<T>& self) {
                          T* g = xn->grad_buffer();
                          for (std::size_t i = 0; i < self.grad.size(); ++i) {
                            g[i] += factor * self.grad[i];
                          }
                        });
}

template <typename T>
BasicTensor<T> sum(const BasicTensor<T>& x) {
  double s = 0.0;
  for (T v : x.values()) s += v;
  auto xn = x.node();
  return make_result<T>("sum", Shape{}, std::vector<T>{static_cast<T>(s)}, {xn},
                        [xn](detail::TensorNode<T>& self) {
                          T* g = xn->grad_buffer();
                          const T up = self.grad[0];
                          for (std::size_t i = 0; i < xn->value.size(); ++i) g[i] += up;
                        });
}

template <typename T>
BasicTensor<T> mean(const BasicTensor<T>& x) {
  require(x.size() > 0, "mean", "empty tensor");
  return scale(sum(x), static_cast<T>(1.0 / static_cast<double>(x.size())));
}

#define COVERDET_INSTANTIATE_OPS(T)                                                     \
  template BasicTensor<T> conv2d(const BasicTensor<T>&, const BasicTensor<T>&,          \
                                 const BasicTensor<T>&);                                \
  template BasicTensor<T> maxpool2(const BasicTensor<T>&);                              \
  template BasicTensor<T> dense(const BasicTensor<T>&, const BasicTensor<T>&,           \
                                const BasicTensor<T>&);                                 \
  template BasicTensor<T> relu(const BasicTensor<T>&);                                  \
  template BasicTensor<T> sigmoid(const BasicTensor<T>&);                               \
  template BasicTensor<T> dropout(const BasicTensor<T>&, double, bool, Rng&, bool);     \
  template BasicTensor<T> reshape(const BasicTensor<T>&, Shape);                        \
  template BasicTensor<T> flatten(const BasicTensor<T>&);                               \
  template BasicTensor<T> select_row(const BasicTensor<T>&, std::size_t);               \
  template BasicTensor<T> add(const BasicTensor<T>&, const BasicTensor<T>&);            \
  template BasicTensor<T> sub(const BasicTensor<T>&, const BasicTensor<T>&);            \
  template BasicTensor<T> mul(const BasicTensor<T>&, const BasicTensor<T>&);            \
  template BasicTensor<T> square(const BasicTensor<T>&);                                \
  template BasicTensor<T> scale(const BasicTensor<T>&, T);                              \
  template BasicTensor<T> sum(const BasicTensor<T>&);                                   \
  template BasicTensor<T> mean(const BasicTensor<T>&);

COVERDET_INSTANTIATE_OPS(float)
COVERDET_INSTANTIATE_OPS(double)

#undef COVERDET_INSTANTIATE_OPS

}  // namespace coverdet
