#pragma once

#include <random>

#include "fppformer/tensor.hpp"

namespace fppformer {

using Rng = std::mt19937_64;

/// Additive logit sentinel for masked positions. exp(-1e30 - max) underflows
/// to exactly 0 while every intermediate stays finite.
inline constexpr double kMaskSentinel = -1e30;

// Elementwise arithmetic. `b` may also be a suffix of `a`'s shape, in which
// case it is broadcast over the leading dimensions.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double value);
Tensor relu(const Tensor& a);
Tensor abs(const Tensor& a);
Tensor square(const Tensor& a);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

/// Same values under a new shape of equal element count.
Tensor reshape(const Tensor& a, Shape shape);
Tensor flatten(const Tensor& a);
/// Repeats `a` under new leading axes `lead`; gradients sum over the copies.
Tensor expand_leading(const Tensor& a, const Shape& lead);
/// Swaps the last two axes.
Tensor transpose_last2(const Tensor& a);

/// [..., M, K] x [K, N] or [..., M, K] x [..., K, N] with equal batch extents.
Tensor matmul(const Tensor& a, const Tensor& b);

/// x[..., F_in] * weight[F_in, F_out] + bias[F_out]. `bias` may be undefined.
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

/// Stabilised softmax along `axis`. Slices that are entirely -inf yield zeros.
Tensor softmax(const Tensor& x, std::size_t axis);

Tensor layer_norm(const Tensor& x, std::size_t axis, const Tensor& gain,
                  const Tensor& bias, double eps = 1e-5);

/// Inverted dropout. Identity when `training` is false or `rate` is zero.
Tensor dropout(const Tensor& x, double rate, bool training, Rng* rng);

/// Adds kMaskSentinel to the diagonal of the trailing square matrices.
Tensor mask_diagonal(const Tensor& scores);

}  // namespace fppformer
