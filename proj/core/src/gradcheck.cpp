#include "fppformer/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "fppformer/ops.hpp"

namespace fppformer {

std::vector<double> finite_diff_gradient(const std::function<double(std::span<const double>)>& f,
                                         std::span<const double> point, double h) {
  std::vector<double> x(point.begin(), point.end());
  std::vector<double> grad(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + h;
    const double fp = f(x);
    x[i] = orig - h;
    const double fm = f(x);
    x[i] = orig;
    grad[i] = (fp - fm) / (2.0 * h);
  }
  return grad;
}

double gradient_relative_error(double autodiff, double numeric, double floor) {
  return std::fabs(autodiff - numeric) / std::max(std::fabs(autodiff), floor);
}

ModelConfig gradcheck_mini_config() {
  ModelConfig c;
  c.input_len = 24;
  c.pred_len = 24;
  c.stages = 2;
  c.patch_size = 6;
  c.embed_dim = 4;
  return c;
}

GradcheckReport model_gradcheck(const ModelConfig& config, const GradcheckOptions& opts) {
  Model model(config, opts.seed);
  Rng data_rng(opts.seed + 1);
  std::normal_distribution<double> normal;
  std::vector<double> x(config.input_len);
  for (auto& v : x) v = normal(data_rng);
  const Tensor input(Shape{x.size()}, x);
  const std::uint64_t dropout_seed = opts.seed ^ 0x5DEECE66Dull;
  auto forward = [&] {
    Rng rng(dropout_seed);
    return model.forward(input, {true, &rng, nullptr});
  };

  // Targets sit a small random distance from the current forecast. A small
  // loss keeps the rounding noise of each loss evaluation, and therefore of
  // the difference quotient, well below the smallest gradients checked.
  std::vector<double> y;
  {
    NoGradGuard no_grad;
    y = forward().to_vector();
  }
  for (auto& v : y) v += opts.target_offset * normal(data_rng);
  const Tensor target(Shape{y.size()}, y);
  auto loss_of = [&] { return forecast_loss(forward(), target); };

  model.zero_grad();
  backward(loss_of());

  GradcheckReport report;
  NoGradGuard no_grad;
  for (const auto& p : model.parameters()) {
    Tensor param = p.tensor;
    std::vector<double> analytic(param.numel(), 0.0);
    if (param.has_grad()) std::copy(param.grad().begin(), param.grad().end(), analytic.begin());
    if (opts.corrupt_parameter && *opts.corrupt_parameter == p.name) {
      for (auto& g : analytic) g = g * 1.5 + 1e-2;
    }
    ParameterGradcheck pc{p.name, analytic.size(), 0.0, 0};
    auto values = param.mutable_data();
    for (std::size_t i = 0; i < analytic.size(); ++i) {
      const double orig = values[i];
      values[i] = orig + opts.step;
      const double fp = loss_of().item();
      values[i] = orig - opts.step;
      const double fm = loss_of().item();
      values[i] = orig;
      const double err = gradient_relative_error(analytic[i], (fp - fm) / (2.0 * opts.step));
      if (err > pc.max_rel_error) {
        pc.max_rel_error = err;
        pc.worst_index = i;
      }
    }
    if (report.parameters.empty() || pc.max_rel_error > report.worst_error) {
      report.worst_error = pc.max_rel_error;
      report.worst_parameter = pc.name;
    }
    report.parameters.push_back(std::move(pc));
  }
  return report;
}

}  // namespace fppformer
