#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "fppformer/train.hpp"

namespace fppformer {

struct AblationResult {
  Variant variant = Variant::Full;
  std::vector<std::uint64_t> seeds;
  std::vector<MetricsReport> per_seed;
  MetricsReport mean;  // field-wise mean over seeds
};

/// Field-wise mean of several reports; NaN fields stay NaN.
MetricsReport mean_report(const std::vector<MetricsReport>& reports, const std::string& label);

/// Trains and evaluates `variant` under seeds spec.seed, spec.seed+1, ...
AblationResult run_ablation(Variant variant, const Dataset& ds, ModelConfig config,
                            const TrainSpec& spec, const SplitSpec& split, std::size_t n_seeds,
                            std::optional<std::size_t> periodicity,
                            const std::function<void(std::uint64_t, const MetricsReport&)>&
                                on_seed = {});

}  // namespace fppformer
