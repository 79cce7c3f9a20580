#include "fppformer/attention.hpp"

#include <algorithm>
#include <cmath>

namespace fppformer {

Linear Linear::init(std::size_t fan_in, std::size_t fan_out, bool with_bias, Rng& rng) {
  const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> u(-bound, bound);
  std::vector<double> w(fan_in * fan_out);
  for (auto& x : w) x = u(rng);
  Linear l;
  l.weight = Tensor::parameter({fan_in, fan_out}, std::move(w));
  if (with_bias) l.bias = Tensor::parameter({fan_out}, std::vector<double>(fan_out, 0.0));
  return l;
}

LayerNormParams LayerNormParams::init(std::size_t dim) {
  return {Tensor::parameter({dim}, std::vector<double>(dim, 1.0)),
          Tensor::parameter({dim}, std::vector<double>(dim, 0.0))};
}

AttentionBlockParams AttentionBlockParams::init(std::size_t dim, double dropout, bool feed_forward,
                                                Rng& rng) {
  AttentionBlockParams p;
  p.dim = dim;
  p.dropout = dropout;
  p.feed_forward = feed_forward;
  p.query = Linear::init(dim, dim, true, rng);
  p.key = Linear::init(dim, dim, false, rng);
  p.value = Linear::init(dim, dim, true, rng);
  p.output = Linear::init(dim, dim, true, rng);
  p.norm_attn = LayerNormParams::init(dim);
  if (feed_forward) {
    p.ff_in = Linear::init(dim, 4 * dim, true, rng);
    p.ff_out = Linear::init(4 * dim, dim, true, rng);
    p.norm_ff = LayerNormParams::init(dim);
  }
  return p;
}

void AttentionBlockParams::collect(const std::string& prefix,
                                   std::vector<NamedParameter>& out) const {
  auto add_linear = [&](const std::string& name, const Linear& l) {
    out.push_back({prefix + "." + name + ".weight", l.weight});
    if (l.bias.defined()) out.push_back({prefix + "." + name + ".bias", l.bias});
  };
  out.push_back({prefix + ".norm_attn.gain", norm_attn.gain});
  out.push_back({prefix + ".norm_attn.bias", norm_attn.bias});
  add_linear("query", query);
  add_linear("key", key);
  add_linear("value", value);
  add_linear("output", output);
  if (feed_forward) {
    out.push_back({prefix + ".norm_ff.gain", norm_ff.gain});
    out.push_back({prefix + ".norm_ff.bias", norm_ff.bias});
    add_linear("ff_in", ff_in);
    add_linear("ff_out", ff_out);
  }
}

Tensor scaled_dot_product(const Tensor& q, const Tensor& k, const Tensor& v, MaskKind mask,
                          Tensor* weights) {
  if (q.rank() < 2 || k.rank() != q.rank() || v.rank() != q.rank()) {
    throw ShapeError("scaled_dot_product: ranks of q " + shape_str(q.shape()) + ", k " +
                     shape_str(k.shape()) + ", v " + shape_str(v.shape()) + " disagree");
  }
  const std::size_t r = q.rank();
  const std::size_t t = q.dim(r - 2);
  const std::size_t tk = k.dim(r - 2);
  const std::size_t dh = q.dim(r - 1);
  if (k.dim(r - 1) != dh || v.dim(r - 2) != tk) {
    throw ShapeError("scaled_dot_product: q " + shape_str(q.shape()) + ", k " +
                     shape_str(k.shape()) + ", v " + shape_str(v.shape()) + " are incompatible");
  }
  if (mask == MaskKind::Diagonal) {
    if (t != tk) {
      throw ShapeError("scaled_dot_product: diagonal mask needs a square score matrix, got " +
                       std::to_string(t) + "x" + std::to_string(tk));
    }
    if (t < 2) {
      throw DegenerateMaskError(
          "scaled_dot_product: diagonal mask over a single token masks the whole row");
    }
  }
  Tensor scores = scale(matmul(q, transpose_last2(k)), 1.0 / std::sqrt(static_cast<double>(dh)));
  if (mask == MaskKind::Diagonal) scores = mask_diagonal(scores);
  Tensor w = softmax(scores, r - 1);
  if (weights != nullptr) *weights = w;
  return matmul(w, v);
}

Tensor attention_block(const Tensor& x, const Tensor* source, const AttentionBlockParams& params,
                       MaskKind mask, const ForwardContext& ctx, Tensor* weights) {
  if (x.shape().back() != params.dim) {
    throw ShapeError("attention block of width " + std::to_string(params.dim) +
                     " applied to tensor " + shape_str(x.shape()));
  }
  Tensor h = params.norm_attn(x);
  const Tensor& kv_in = source != nullptr ? *source : h;
  Tensor attn = scaled_dot_product(params.query(h), params.key(kv_in), params.value(kv_in), mask,
                                   weights);
  Tensor y = add(x, dropout(params.output(attn), params.dropout, ctx.training, ctx.rng));
  if (!params.feed_forward) return y;
  Tensor f = params.ff_out(relu(params.ff_in(params.norm_ff(y))));
  return add(y, dropout(f, params.dropout, ctx.training, ctx.rng));
}

Tensor dm_element_wise_self_attention(const Tensor& x, const AttentionBlockParams& params,
                                      const ForwardContext& ctx, MaskKind mask, Tensor* weights) {
  if (x.rank() < 3) {
    throw ShapeError("element-wise attention expects [S, P, D], got " + shape_str(x.shape()));
  }
  const std::size_t len = x.dim(x.rank() - 2);
  if (mask == MaskKind::Diagonal && len < 2) {
    throw DegenerateMaskError("element-wise attention: diagonal mask needs patch length >= 2, got " +
                              std::to_string(len));
  }
  return attention_block(x, nullptr, params, mask, ctx, weights);
}

Tensor dm_patch_wise_self_attention(const Tensor& x, const AttentionBlockParams& params,
                                    const ForwardContext& ctx, MaskKind mask, Tensor* weights) {
  if (x.rank() < 2) {
    throw ShapeError("patch-wise attention expects [S, P*D], got " + shape_str(x.shape()));
  }
  const std::size_t n = x.dim(x.rank() - 2);
  if (mask == MaskKind::Diagonal && n < 2) {
    throw DegenerateMaskError("patch-wise attention: diagonal mask needs >= 2 patches, got " +
                              std::to_string(n));
  }
  return attention_block(x, nullptr, params, mask, ctx, weights);
}

Tensor patch_wise_cross_attention(const Tensor& query, const Tensor& source,
                                  const AttentionBlockParams& params, const ForwardContext& ctx,
                                  Tensor* weights) {
  const auto& qs = query.shape();
  const auto& ss = source.shape();
  if (qs.size() < 2 || qs.size() != ss.size() || qs.back() != ss.back() ||
      !std::equal(qs.begin(), qs.end() - 2, ss.begin())) {
    throw ShapeError("cross-attention: query " + shape_str(query.shape()) + " and source " +
                     shape_str(source.shape()) + " must be [S, F] with equal F");
  }
  return attention_block(query, &source, params, MaskKind::None, ctx, weights);
}

}  // namespace fppformer
