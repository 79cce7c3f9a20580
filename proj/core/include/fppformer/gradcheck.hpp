#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fppformer/model.hpp"

namespace fppformer {

/// Central-difference gradient of a scalar function, one coordinate at a time.
std::vector<double> finite_diff_gradient(const std::function<double(std::span<const double>)>& f,
                                         std::span<const double> point, double h = 1e-5);

/// |a - n| / max(|a|, floor), the comparison used by every gradient check here.
double gradient_relative_error(double autodiff, double numeric, double floor = 1e-8);

/// L=24, H=24, M=2, P0=6, D=4.
ModelConfig gradcheck_mini_config();

struct GradcheckOptions {
  std::uint64_t seed = 0;
  double step = 1e-5;
  /// Std of the target's random offset from the model's own forecast.
  double target_offset = 0.1;
  /// Test hook: perturbs the autodiff gradient of this parameter before comparison.
  std::optional<std::string> corrupt_parameter;
};

struct ParameterGradcheck {
  std::string name;
  std::size_t count = 0;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
};

struct GradcheckReport {
  std::vector<ParameterGradcheck> parameters;
  double worst_error = 0.0;
  std::string worst_parameter;

  bool passed(double tolerance = 1e-3) const { return worst_error < tolerance; }
};

/// Compares autodiff gradients of the forecast loss on one random window with
/// central differences, scalar by scalar, for every model parameter. Dropout
/// runs in training mode with identical masks on every evaluation.
GradcheckReport model_gradcheck(const ModelConfig& config, const GradcheckOptions& opts = {});

}  // namespace fppformer
