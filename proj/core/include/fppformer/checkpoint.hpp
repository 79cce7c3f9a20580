#pragma once

#include <cstdint>
#include <filesystem>

#include "fppformer/model.hpp"

namespace fppformer {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Writes the little-endian binary checkpoint and a `<path>.manifest` sidecar.
///
/// Layout: "FPPF", u32 version, config block (u32 input_len, pred_len, stages,
/// patch_size, embed_dim, variant, feed_forward; f64 dropout), u64 scalar
/// count, then every parameter as f64 in declaration order.
void save_checkpoint(const Model& model, const std::filesystem::path& path);

/// Rebuilds the model from its stored config and overwrites all parameters.
Model load_checkpoint(const std::filesystem::path& path);

std::filesystem::path manifest_path(const std::filesystem::path& checkpoint);

}  // namespace fppformer
