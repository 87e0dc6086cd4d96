#pragma once

#include <cstdint>

#include "coverdet/random.hpp"
#include "coverdet/tensor.hpp"

namespace coverdet {

// Differentiable operations. All throw ShapeMismatch on incompatible shapes
// and NumericalFault if a result contains NaN or Inf.

/// Stride-1, valid-padding cross-correlation.
/// input [N,C,H,W], kernels [F,C,kh,kw], bias [F] -> [N,F,H-kh+1,W-kw+1].
template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicTensor<T>& kernels,
                      const BasicTensor<T>& bias);

/// 2x2 non-overlapping max pooling, [N,C,H,W] -> [N,C,ceil(H/2),ceil(W/2)].
/// Odd edges behave as if padded with -inf. Ties go to the first element in
/// row-major window order, which also receives the whole gradient.
template <typename T>
BasicTensor<T> maxpool2(const BasicTensor<T>& input);

/// input [N,D] x weight [D,K] + bias [K] -> [N,K].
template <typename T>
BasicTensor<T> dense(const BasicTensor<T>& input, const BasicTensor<T>& weight,
                     const BasicTensor<T>& bias);

/// max(x, 0); the derivative at 0 is taken as 0.
template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& x);

template <typename T>
BasicTensor<T> sigmoid(const BasicTensor<T>& x);

/// Inverted dropout: when training, zeroes each element with probability
/// `rate` and scales survivors by 1/(1-rate). Identity otherwise. With
/// `shared_rows`, one mask is drawn for a row and reused for every row of
/// the leading dimension.
template <typename T>
BasicTensor<T> dropout(const BasicTensor<T>& x, double rate, bool training, Rng& rng,
                       bool shared_rows = false);

template <typename T>
BasicTensor<T> reshape(const BasicTensor<T>& x, Shape shape);

/// [N, ...] -> [N, prod(rest)].
template <typename T>
BasicTensor<T> flatten(const BasicTensor<T>& x);

/// Row `index` of a [N,D] tensor as a [D] tensor.
template <typename T>
BasicTensor<T> select_row(const BasicTensor<T>& x, std::size_t index);

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b);

template <typename T>
BasicTensor<T> sub(const BasicTensor<T>& a, const BasicTensor<T>& b);

template <typename T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b);

template <typename T>
BasicTensor<T> square(const BasicTensor<T>& x);

template <typename T>
BasicTensor<T> scale(const BasicTensor<T>& x, T factor);

/// Sum of all elements as a scalar (accumulated in double).
template <typename T>
BasicTensor<T> sum(const BasicTensor<T>& x);

template <typename T>
BasicTensor<T> mean(const BasicTensor<T>& x);

}  // namespace coverdet
