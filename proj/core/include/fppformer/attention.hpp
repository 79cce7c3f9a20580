#pragma once

#include <string>
#include <vector>

#include "fppformer/ops.hpp"
#include "fppformer/tensor.hpp"

namespace fppformer {

enum class MaskKind { None, Diagonal };

/// Raised when a diagonal mask would leave a whole score row masked.
struct DegenerateMaskError : ShapeError {
  using ShapeError::ShapeError;
};

struct NamedParameter {
  std::string name;
  Tensor tensor;
};

struct Linear {
  Tensor weight;  // [F_in, F_out]
  Tensor bias;    // [F_out], may be undefined

  /// Weights uniform in +-sqrt(1/fan_in), bias zero.
  static Linear init(std::size_t fan_in, std::size_t fan_out, bool with_bias, Rng& rng);
  Tensor operator()(const Tensor& x) const { return linear(x, weight, bias); }
};

struct LayerNormParams {
  Tensor gain;
  Tensor bias;

  static LayerNormParams init(std::size_t dim);
  Tensor operator()(const Tensor& x) const { return layer_norm(x, x.rank() - 1, gain, bias); }
};

/// One single-head pre-norm block: attention sub-block and feed-forward
/// sub-block, each wrapped in layer norm, dropout and a residual add.
/// The key projection has no bias: a key bias shifts every score in a row by
/// the same amount and cancels in the softmax.
struct AttentionBlockParams {
  std::size_t dim = 0;
  double dropout = 0.0;
  bool feed_forward = true;
  Linear query, key, value, output;
  Linear ff_in, ff_out;  // dim -> 4*dim -> dim, unused when feed_forward is off
  LayerNormParams norm_attn, norm_ff;

  static AttentionBlockParams init(std::size_t dim, double dropout, bool feed_forward, Rng& rng);
  void collect(const std::string& prefix, std::vector<NamedParameter>& out) const;
};

struct ForwardContext {
  bool training = false;
  Rng* rng = nullptr;
};

/// Softmax(q k^T / sqrt(Dh) + mask) v over the trailing two axes; leading axes
/// are batch. When `weights` is non-null it receives the post-softmax matrix.
Tensor scaled_dot_product(const Tensor& q, const Tensor& k, const Tensor& v, MaskKind mask,
                          Tensor* weights = nullptr);

/// Generic residual block. `source` supplies keys/values for cross-attention;
/// null means self-attention on `x`.
Tensor attention_block(const Tensor& x, const Tensor* source, const AttentionBlockParams& params,
                       MaskKind mask, const ForwardContext& ctx, Tensor* weights = nullptr);

/// x: [..., S, P, D]. Attention runs inside each patch over its P elements.
Tensor dm_element_wise_self_attention(const Tensor& x, const AttentionBlockParams& params,
                                      const ForwardContext& ctx,
                                      MaskKind mask = MaskKind::Diagonal,
                                      Tensor* weights = nullptr);

/// x: [..., S, P*D]. Every patch is one token.
Tensor dm_patch_wise_self_attention(const Tensor& x, const AttentionBlockParams& params,
                                    const ForwardContext& ctx, MaskKind mask = MaskKind::Diagonal,
                                    Tensor* weights = nullptr);

/// query: [..., S_q, F], source: [..., S_k, F]. Never masked.
Tensor patch_wise_cross_attention(const Tensor& query, const Tensor& source,
                                  const AttentionBlockParams& params, const ForwardContext& ctx,
                                  Tensor* weights = nullptr);

}  // namespace fppformer
