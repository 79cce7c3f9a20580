#include "fppformer/ablation.hpp"

namespace fppformer {

MetricsReport mean_report(const std::vector<MetricsReport>& reports, const std::string& label) {
  if (reports.empty()) throw ConfigError("mean_report: no reports to average");
  MetricsReport m;
  m.label = label;
  for (const auto& r : reports) {
    m.mse += r.mse;
    m.mae += r.mae;
    m.smape += r.smape;
    m.mase += r.mase;
    m.owa += r.owa;
    m.n_windows += r.n_windows;
  }
  const double n = static_cast<double>(reports.size());
  m.mse /= n;
  m.mae /= n;
  m.smape /= n;
  m.mase /= n;
  m.owa /= n;
  m.n_windows /= reports.size();
  return m;
}

AblationResult run_ablation(Variant variant, const Dataset& ds, ModelConfig config,
                            const TrainSpec& spec, const SplitSpec& split, std::size_t n_seeds,
                            std::optional<std::size_t> periodicity,
                            const std::function<void(std::uint64_t, const MetricsReport&)>& on_seed) {
  if (n_seeds == 0) throw ConfigError("n_seeds must be positive");
  config.variant = variant;
  config.validate();
  AblationResult out;
  out.variant = variant;
  for (std::size_t k = 0; k < n_seeds; ++k) {
    TrainSpec s = spec;
    s.seed = spec.seed + k;
    auto res = run_experiment(ds, config, s, split, periodicity);
    if (on_seed) on_seed(s.seed, res.metrics);
    out.seeds.push_back(s.seed);
    out.per_seed.push_back(std::move(res.metrics));
  }
  out.mean = mean_report(out.per_seed, std::string(variant_name(variant)));
  return out;
}

}  // namespace fppformer
