#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fppformer/attention.hpp"

namespace fppformer {

/// Architecture variants compared in the ablation study.
enum class Variant { Full, PointWiseOnly, PatchWiseOnly, BottomUpDecoder, LinearDecoder, NoDM };

std::string_view variant_name(Variant v);
Variant parse_variant(std::string_view name);
const std::vector<Variant>& all_variants();

struct ModelConfig {
  std::size_t input_len = 96;
  std::size_t pred_len = 96;
  std::size_t stages = 3;
  std::size_t patch_size = 6;
  std::size_t embed_dim = 32;
  double dropout = 0.1;
  bool feed_forward = true;
  Variant variant = Variant::Full;

  /// Patch length of the deepest stage, patch_size * 2^(stages-1).
  std::size_t coarse_patch() const;
  /// Patch length of 1-based encoder stage `i`.
  std::size_t stage_patch(std::size_t i) const;
  /// Throws ConfigError naming the violated constraint.
  void validate() const;
};

/// One encoder stage output with its shape metadata.
struct StageFeatures {
  Tensor features;  // [..., S, P, D]
  std::size_t stage = 0;
  std::size_t patch_count = 0;
  std::size_t patch_len = 0;
};

/// Post-softmax attention weights captured during one forward pass.
struct AttentionCapture {
  std::size_t stage = 0;
  std::string site;  // enc_elem, enc_patch, dec_cross, dec_elem
  Tensor weights;
};

struct ForwardOptions {
  bool training = false;
  Rng* rng = nullptr;
  std::vector<AttentionCapture>* captures = nullptr;
};

// Parameter-free reshapes.
Tensor segment(const Tensor& x, std::size_t patch_len);  // [L, D] -> [L/P, P, D]
Tensor merge_patches(const Tensor& x);                   // [S, P, D] -> [S/2, 2P, D]
Tensor split_patches(const Tensor& x);                   // [S, P, D] -> [2S, P/2, D]

/// MSE + MAE.
Tensor forecast_loss(const Tensor& pred, const Tensor& target);

class Model {
 public:
  Model(const ModelConfig& config, std::uint64_t seed);

  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;
  Model(Model&&) = default;
  Model& operator=(Model&&) = default;

  const ModelConfig& config() const { return config_; }

  /// x: RevIN-normalised input [..., L]. Returns the forecast [..., H]; any
  /// leading axes are independent samples.
  Tensor forward(const Tensor& x, const ForwardOptions& opts = {}) const;

  Tensor embed(const Tensor& x) const;  // [..., L] -> [..., L, D]
  Tensor encoder_stage(std::size_t stage, const Tensor& x, const ForwardOptions& opts = {}) const;
  std::vector<StageFeatures> encode(const Tensor& segmented, const ForwardOptions& opts = {}) const;
  Tensor decoder_stage(std::size_t stage, const Tensor& query, const StageFeatures& lateral,
                       const ForwardOptions& opts = {}) const;
  Tensor decode(const std::vector<StageFeatures>& encoded, const ForwardOptions& opts = {}) const;
  Tensor project(const StageFeatures& enc_final, const Tensor& dec_final) const;

  /// All trainable tensors in declaration order.
  const std::vector<NamedParameter>& parameters() const { return params_; }
  std::vector<Tensor> parameter_tensors() const;
  std::size_t parameter_count() const;
  /// Parameters used only by the decoder (query, decoder blocks, decoder head).
  std::vector<std::string> decoder_parameter_names() const;

  std::vector<std::vector<double>> snapshot() const;
  void restore(const std::vector<std::vector<double>>& values);
  void zero_grad();

  const Tensor& decoder_query() const { return query_; }

 private:
  struct EncoderStage {
    std::optional<AttentionBlockParams> element;
    std::optional<AttentionBlockParams> patch;
  };
  struct DecoderStage {
    AttentionBlockParams cross;
    std::optional<AttentionBlockParams> element;
  };

  MaskKind encoder_mask() const;
  void register_parameters();

  ModelConfig config_;
  Linear embedding_;
  std::vector<EncoderStage> encoder_;
  Tensor query_;
  std::vector<DecoderStage> decoder_;
  Linear head_encoder_;
  Linear head_decoder_;
  std::vector<NamedParameter> params_;
};

}  // namespace fppformer
