#include "fppformer/model.hpp"

#include <algorithm>
#include <array>

namespace fppformer {

namespace {

constexpr std::array<std::pair<Variant, std::string_view>, 6> kVariantNames{{
    {Variant::Full, "full"},
    {Variant::PointWiseOnly, "point_wise_only"},
    {Variant::PatchWiseOnly, "patch_wise_only"},
    {Variant::BottomUpDecoder, "bottom_up_decoder"},
    {Variant::LinearDecoder, "linear_decoder"},
    {Variant::NoDM, "no_dm"},
}};

// Guard for attention over the whole un-patched sequence.
constexpr std::size_t kPointWiseMaxLen = 512;

void record(const ForwardOptions& opts, std::size_t stage, const char* site, const Tensor& w) {
  if (opts.captures != nullptr) opts.captures->push_back({stage, site, w});
}

ForwardContext context(const ForwardOptions& opts) { return {opts.training, opts.rng}; }

// x's leading axes (all but the last `drop`) followed by `tail`.
Shape with_tail(const Tensor& x, std::size_t drop, std::initializer_list<std::size_t> tail) {
  Shape s(x.shape().begin(), x.shape().end() - static_cast<std::ptrdiff_t>(drop));
  s.insert(s.end(), tail);
  return s;
}

}  // namespace

std::string_view variant_name(Variant v) {
  for (const auto& [variant, name] : kVariantNames)
    if (variant == v) return name;
  return "unknown";
}

Variant parse_variant(std::string_view name) {
  for (const auto& [variant, n] : kVariantNames)
    if (n == name) return variant;
  throw ConfigError("unknown variant '" + std::string(name) +
                    "' (expected full, point_wise_only, patch_wise_only, bottom_up_decoder, "
                    "linear_decoder or no_dm)");
}

const std::vector<Variant>& all_variants() {
  static const std::vector<Variant> v{Variant::Full,          Variant::PointWiseOnly,
                                      Variant::PatchWiseOnly, Variant::BottomUpDecoder,
                                      Variant::LinearDecoder, Variant::NoDM};
  return v;
}

std::size_t ModelConfig::coarse_patch() const { return stage_patch(stages); }

std::size_t ModelConfig::stage_patch(std::size_t i) const {
  return patch_size << (i - 1);
}

void ModelConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw ConfigError(std::string(name) + " must be positive");
  };
  positive(input_len, "input_len");
  positive(pred_len, "pred_len");
  positive(stages, "stages");
  positive(patch_size, "patch_size");
  positive(embed_dim, "embed_dim");
  if (stages > 16) throw ConfigError("stages must be at most 16");
  if (!(dropout >= 0.0 && dropout < 1.0)) {
    throw ConfigError("dropout must lie in [0, 1), got " + std::to_string(dropout));
  }
  const std::size_t coarse = coarse_patch();
  const std::string unit = "patch_size*2^(stages-1) = " + std::to_string(coarse);
  for (auto [len, name] : {std::pair{input_len, "input_len"}, std::pair{pred_len, "pred_len"}}) {
    if (len % coarse != 0) {
      throw ConfigError(std::string(name) + " = " + std::to_string(len) + " must be divisible by " +
                        unit);
    }
    if (len / coarse < 2) {
      throw ConfigError(std::string(name) + " = " + std::to_string(len) +
                        " must hold at least 2 patches of " + unit);
    }
  }
  if (variant == Variant::PointWiseOnly &&
      (input_len > kPointWiseMaxLen || pred_len > kPointWiseMaxLen)) {
    throw ConfigError("point_wise_only attends over the whole sequence; input_len and pred_len "
                      "must be at most " + std::to_string(kPointWiseMaxLen));
  }
}

Tensor segment(const Tensor& x, std::size_t patch_len) {
  const std::size_t r = x.rank();
  if (r < 2 || patch_len == 0 || x.dim(r - 2) % patch_len != 0) {
    throw ShapeError("segment: cannot cut " + shape_str(x.shape()) + " into patches of " +
                     std::to_string(patch_len));
  }
  return reshape(x, with_tail(x, 2, {x.dim(r - 2) / patch_len, patch_len, x.dim(r - 1)}));
}

Tensor merge_patches(const Tensor& x) {
  const std::size_t r = x.rank();
  if (r < 3 || x.dim(r - 3) % 2 != 0) {
    throw ShapeError("merge_patches: need [S, P, D] with even S, got " + shape_str(x.shape()));
  }
  return reshape(x, with_tail(x, 3, {x.dim(r - 3) / 2, x.dim(r - 2) * 2, x.dim(r - 1)}));
}

Tensor split_patches(const Tensor& x) {
  const std::size_t r = x.rank();
  if (r < 3 || x.dim(r - 2) % 2 != 0) {
    throw ShapeError("split_patches: need [S, P, D] with even P, got " + shape_str(x.shape()));
  }
  return reshape(x, with_tail(x, 3, {x.dim(r - 3) * 2, x.dim(r - 2) / 2, x.dim(r - 1)}));
}

Tensor forecast_loss(const Tensor& pred, const Tensor& target) {
  if (pred.numel() != target.numel()) {
    throw ShapeError("loss: prediction " + shape_str(pred.shape()) + " and target " +
                     shape_str(target.shape()) + " differ in length");
  }
  Tensor t = target.shape() == pred.shape() ? target : reshape(target, pred.shape());
  Tensor diff = sub(pred, t);
  return add(mean(square(diff)), mean(abs(diff)));
}

Model::Model(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  Rng rng(seed);
  const std::size_t d = config_.embed_dim;
  const std::size_t m = config_.stages;
  const double p = config_.dropout;
  const bool ff = config_.feed_forward;
  const Variant v = config_.variant;

  embedding_ = Linear::init(1, d, true, rng);

  if (v == Variant::PointWiseOnly) {
    encoder_.push_back({AttentionBlockParams::init(d, p, ff, rng), std::nullopt});
  } else {
    for (std::size_t i = 1; i <= m; ++i) {
      EncoderStage s;
      if (v != Variant::PatchWiseOnly) s.element = AttentionBlockParams::init(d, p, ff, rng);
      s.patch = AttentionBlockParams::init(config_.stage_patch(i) * d, p, ff, rng);
      encoder_.push_back(std::move(s));
    }
  }

  {
    const std::size_t pc = config_.coarse_patch();
    std::uniform_real_distribution<double> u(-0.02, 0.02);
    std::vector<double> q(config_.pred_len * d);
    for (auto& e : q) e = u(rng);
    query_ = Tensor::parameter({config_.pred_len / pc, pc, d}, std::move(q));
  }

  if (v == Variant::PointWiseOnly) {
    decoder_.push_back({AttentionBlockParams::init(d, p, ff, rng),
                        AttentionBlockParams::init(d, p, ff, rng)});
  } else {
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t patch =
          v == Variant::BottomUpDecoder ? config_.stage_patch(j) : config_.stage_patch(m + 1 - j);
      DecoderStage s{AttentionBlockParams::init(patch * d, p, ff, rng), std::nullopt};
      if (v != Variant::PatchWiseOnly) s.element = AttentionBlockParams::init(d, p, ff, rng);
      decoder_.push_back(std::move(s));
    }
  }

  head_encoder_ = Linear::init(config_.input_len * d, config_.pred_len, true, rng);
  head_decoder_ = Linear::init(config_.pred_len * d, config_.pred_len, true, rng);
  register_parameters();
}

void Model::register_parameters() {
  params_.clear();
  params_.push_back({"embed.weight", embedding_.weight});
  params_.push_back({"embed.bias", embedding_.bias});
  for (std::size_t i = 0; i < encoder_.size(); ++i) {
    const std::string prefix = "encoder." + std::to_string(i + 1);
    if (encoder_[i].element) encoder_[i].element->collect(prefix + ".elem", params_);
    if (encoder_[i].patch) encoder_[i].patch->collect(prefix + ".patch", params_);
  }
  params_.push_back({"decoder.query", query_});
  for (std::size_t j = 0; j < decoder_.size(); ++j) {
    const std::string prefix = "decoder." + std::to_string(j + 1);
    decoder_[j].cross.collect(prefix + ".cross", params_);
    if (decoder_[j].element) decoder_[j].element->collect(prefix + ".elem", params_);
  }
  params_.push_back({"head.encoder.weight", head_encoder_.weight});
  params_.push_back({"head.encoder.bias", head_encoder_.bias});
  params_.push_back({"head.decoder.weight", head_decoder_.weight});
  params_.push_back({"head.decoder.bias", head_decoder_.bias});
}

std::vector<Tensor> Model::parameter_tensors() const {
  std::vector<Tensor> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.tensor);
  return out;
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.tensor.numel();
  return n;
}

std::vector<std::string> Model::decoder_parameter_names() const {
  std::vector<std::string> out;
  for (const auto& p : params_) {
    if (p.name.starts_with("decoder.") || p.name.starts_with("head.decoder.")) {
      out.push_back(p.name);
    }
  }
  return out;
}

std::vector<std::vector<double>> Model::snapshot() const {
  std::vector<std::vector<double>> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.tensor.to_vector());
  return out;
}

void Model::restore(const std::vector<std::vector<double>>& values) {
  if (values.size() != params_.size()) {
    throw ShapeError("restore: expected " + std::to_string(params_.size()) +
                     " parameter tensors, got " + std::to_string(values.size()));
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto dst = params_[i].tensor.mutable_data();
    if (values[i].size() != dst.size()) {
      throw ShapeError("restore: parameter " + params_[i].name + " has " +
                       std::to_string(dst.size()) + " values, got " +
                       std::to_string(values[i].size()));
    }
    std::copy(values[i].begin(), values[i].end(), dst.begin());
  }
}

void Model::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

MaskKind Model::encoder_mask() const {
  return config_.variant == Variant::NoDM ? MaskKind::None : MaskKind::Diagonal;
}

Tensor Model::embed(const Tensor& x) const {
  if (x.rank() == 0 || x.shape().back() != config_.input_len) {
    throw ShapeError("embed: expected " + std::to_string(config_.input_len) +
                     " input values, got " + shape_str(x.shape()));
  }
  return embedding_(reshape(x, with_tail(x, 0, {1})));
}

Tensor Model::encoder_stage(std::size_t stage, const Tensor& x, const ForwardOptions& opts) const {
  if (stage < 1 || stage > encoder_.size()) {
    throw ShapeError("encoder_stage: stage " + std::to_string(stage) + " out of range");
  }
  if (x.rank() < 3) throw ShapeError("encoder_stage: expected [S, P, D], got " + shape_str(x.shape()));
  const auto& s = encoder_[stage - 1];
  const auto ctx = context(opts);
  const MaskKind mask = encoder_mask();
  Tensor y = x;
  if (s.element) {
    Tensor w;
    y = dm_element_wise_self_attention(y, *s.element, ctx, mask, opts.captures ? &w : nullptr);
    record(opts, stage, "enc_elem", w);
  }
  if (s.patch) {
    const std::size_t r = y.rank();
    const std::size_t n = y.dim(r - 3), len = y.dim(r - 2), d = y.dim(r - 1);
    Tensor w;
    Tensor flat = dm_patch_wise_self_attention(reshape(y, with_tail(y, 3, {n, len * d})), *s.patch,
                                               ctx, mask, opts.captures ? &w : nullptr);
    record(opts, stage, "enc_patch", w);
    y = reshape(flat, with_tail(y, 3, {n, len, d}));
  }
  return y;
}

std::vector<StageFeatures> Model::encode(const Tensor& segmented, const ForwardOptions& opts) const {
  std::vector<StageFeatures> out;
  Tensor x = segmented;
  for (std::size_t i = 1; i <= encoder_.size(); ++i) {
    x = encoder_stage(i, x, opts);
    const std::size_t r = x.rank();
    out.push_back({x, i, x.dim(r - 3), x.dim(r - 2)});
    if (i < encoder_.size()) x = merge_patches(x);
  }
  return out;
}

Tensor Model::decoder_stage(std::size_t stage, const Tensor& query, const StageFeatures& lateral,
                            const ForwardOptions& opts) const {
  if (stage < 1 || stage > decoder_.size()) {
    throw ShapeError("decoder_stage: stage " + std::to_string(stage) + " out of range");
  }
  const auto& s = decoder_[stage - 1];
  const auto ctx = context(opts);
  const std::size_t d = config_.embed_dim;
  const Tensor& feats = lateral.features;
  if (query.rank() < 3 || query.rank() != feats.rank() ||
      !std::equal(query.shape().begin(), query.shape().end() - 3, feats.shape().begin())) {
    throw ShapeError("decoder_stage: query " + shape_str(query.shape()) +
                     " and encoder features " + shape_str(feats.shape()) +
                     " must be [S, P, D] with equal leading axes");
  }
  const std::size_t r = query.rank();
  Tensor y;
  Tensor w;
  if (config_.variant == Variant::PointWiseOnly) {
    const std::size_t hq = query.numel() / (shape_numel(with_tail(query, 3, {})) * d);
    const std::size_t lk = feats.numel() / (shape_numel(with_tail(feats, 3, {})) * d);
    Tensor out = patch_wise_cross_attention(reshape(query, with_tail(query, 3, {hq, d})),
                                            reshape(feats, with_tail(feats, 3, {lk, d})), s.cross,
                                            ctx, opts.captures ? &w : nullptr);
    y = reshape(out, with_tail(query, 3, {1, hq, d}));
  } else {
    if (query.dim(r - 2) != lateral.patch_len) {
      throw ShapeError("decoder_stage: query patches " + shape_str(query.shape()) +
                       " do not match lateral encoder stage " + std::to_string(lateral.stage) +
                       " with patch length " + std::to_string(lateral.patch_len));
    }
    const std::size_t n = query.dim(r - 3), len = query.dim(r - 2);
    Tensor out = patch_wise_cross_attention(
        reshape(query, with_tail(query, 3, {n, len * d})),
        reshape(feats, with_tail(feats, 3, {lateral.patch_count, lateral.patch_len * d})), s.cross,
        ctx, opts.captures ? &w : nullptr);
    y = reshape(out, with_tail(query, 3, {n, len, d}));
  }
  record(opts, stage, "dec_cross", w);
  if (s.element) {
    Tensor we;
    y = dm_element_wise_self_attention(y, *s.element, ctx, MaskKind::None,
                                       opts.captures ? &we : nullptr);
    record(opts, stage, "dec_elem", we);
  }
  return y;
}

Tensor Model::decode(const std::vector<StageFeatures>& encoded, const ForwardOptions& opts) const {
  if (encoded.size() != encoder_.size()) {
    throw ShapeError("decode: expected " + std::to_string(encoder_.size()) +
                     " encoder stages, got " + std::to_string(encoded.size()));
  }
  const std::size_t d = config_.embed_dim;
  const std::size_t h = config_.pred_len;
  const std::size_t m = decoder_.size();
  const Tensor& f0 = encoded.front().features;
  const Shape lead(f0.shape().begin(), f0.shape().end() - 3);
  switch (config_.variant) {
    case Variant::PointWiseOnly:
      return decoder_stage(1, expand_leading(reshape(query_, {1, h, d}), lead), encoded[0], opts);
    case Variant::BottomUpDecoder: {
      const std::size_t p0 = config_.patch_size;
      Tensor q = expand_leading(reshape(query_, {h / p0, p0, d}), lead);
      for (std::size_t j = 1; j <= m; ++j) {
        q = decoder_stage(j, q, encoded[j - 1], opts);
        if (j < m) q = merge_patches(q);
      }
      return q;
    }
    default: {
      Tensor q = expand_leading(query_, lead);
      for (std::size_t j = 1; j <= m; ++j) {
        q = decoder_stage(j, q, encoded[m - j], opts);
        if (j < m) q = split_patches(q);
      }
      return q;
    }
  }
}

Tensor Model::project(const StageFeatures& enc_final, const Tensor& dec_final) const {
  const std::size_t d = config_.embed_dim;
  const Tensor& e = enc_final.features;
  if (e.rank() < 3 || e.dim(e.rank() - 3) * e.dim(e.rank() - 2) * e.dim(e.rank() - 1) !=
                          config_.input_len * d) {
    throw ShapeError("project: encoder output " + shape_str(e.shape()) +
                     " does not hold input_len*embed_dim values per sample");
  }
  Tensor pred = head_encoder_(reshape(e, with_tail(e, 3, {config_.input_len * d})));
  if (dec_final.defined()) {
    const std::size_t r = dec_final.rank();
    if (r != e.rank() ||
        dec_final.dim(r - 3) * dec_final.dim(r - 2) * dec_final.dim(r - 1) != config_.pred_len * d) {
      throw ShapeError("project: decoder output " + shape_str(dec_final.shape()) +
                       " does not hold pred_len*embed_dim values per sample");
    }
    pred = add(pred, head_decoder_(reshape(dec_final, with_tail(dec_final, 3, {config_.pred_len * d}))));
  }
  return pred;
}

Tensor Model::forward(const Tensor& x, const ForwardOptions& opts) const {
  Tensor emb = embed(x);
  Tensor seg = config_.variant == Variant::PointWiseOnly
                   ? reshape(emb, with_tail(emb, 2, {1, config_.input_len, config_.embed_dim}))
                   : segment(emb, config_.patch_size);
  auto enc = encode(seg, opts);
  if (config_.variant == Variant::LinearDecoder) return project(enc.back(), Tensor());
  return project(enc.back(), decode(enc, opts));
}

}  // namespace fppformer
