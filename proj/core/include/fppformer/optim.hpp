#pragma once

#include <cstdint>
#include <vector>

#include "fppformer/tensor.hpp"

namespace fppformer {

/// Adam moments for a fixed list of parameters. `lr` is read at every step so
/// a schedule can rewrite it between steps.
struct AdamState {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t t = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;

  AdamState() = default;
  AdamState(const std::vector<Tensor>& params, double learning_rate);
};

/// One bias-corrected Adam update of `params` from their accumulated grads.
/// Parameters that never received a gradient are treated as having grad 0.
void adam_step(std::vector<Tensor>& params, AdamState& state);

/// Explicit-gradient form, used where gradients do not live on the tensors.
void adam_step(std::vector<Tensor>& params, const std::vector<std::vector<double>>& grads,
               AdamState& state);

void zero_grads(std::vector<Tensor>& params);

}  // namespace fppformer
