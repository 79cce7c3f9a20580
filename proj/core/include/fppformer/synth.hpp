#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "fppformer/data.hpp"

namespace fppformer {

struct SinusoidComponent {
  double amplitude = 1.0;
  double period = 24.0;
  double phase = 0.0;
};

struct SynthSpec {
  std::size_t length = 5000;
  std::size_t n_vars = 1;
  std::vector<SinusoidComponent> components{{1.0, 24.0, 0.0}};
  double trend = 0.0;
  double noise = 0.0;
  // Expected fraction of values covered by outlier patches.
  double outlier_rate = 0.0;
  double outlier_magnitude = 0.0;
  std::size_t periodicity = 24;
  std::uint64_t seed = 0;
};

inline constexpr std::size_t kOutlierPatchLen = 6;

struct OutlierPatch {
  std::size_t variable = 0;
  std::size_t start = 0;
  std::size_t length = kOutlierPatchLen;
};

struct SynthResult {
  Dataset dataset;
  std::vector<OutlierPatch> outliers;
};

/// x_t = sum_i a_i sin(2 pi t / p_i + phi_i) + slope t + noise, plus additive
/// outlier patches. Variable v shifts every phase by v*pi/4.
SynthResult synth_generate(const SynthSpec& spec);

void write_outlier_sidecar(const std::vector<OutlierPatch>& outliers,
                           const std::filesystem::path& path);

}  // namespace fppformer
