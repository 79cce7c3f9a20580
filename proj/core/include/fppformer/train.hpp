#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "fppformer/data.hpp"
#include "fppformer/metrics.hpp"
#include "fppformer/model.hpp"

namespace fppformer {

struct TrainSpec {
  std::size_t epochs = 10;
  std::size_t batch_size = 16;
  double lr = 1e-4;
  double lr_decay = 0.5;
  std::size_t patience = 1;
  std::uint64_t seed = 0;

  void validate() const;
  /// lr * lr_decay^epoch for the 0-based epoch index.
  double lr_at(std::size_t epoch) const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_val_loss = 0.0;
  bool stopped_early = false;
};

/// Minibatch Adam on MSE+MAE in normalised space with per-epoch lr decay and
/// early stopping on strict validation improvement. The model ends holding
/// the best-validation parameters.
TrainResult train(Model& model, const std::vector<WindowSample>& train_set,
                  const std::vector<WindowSample>& val_set, const TrainSpec& spec,
                  const std::function<void(const EpochRecord&)>& on_epoch = {});

/// Mean MSE+MAE over the windows, normalised space, evaluation mode.
double validation_loss(const Model& model, const std::vector<WindowSample>& windows);

/// Forecast for one window, restored to the original scale.
std::vector<double> predict(const Model& model, const WindowSample& window);
/// Forecasts for many windows, evaluated in batches.
std::vector<std::vector<double>> predict_all(const Model& model,
                                             const std::vector<WindowSample>& windows);

/// Metrics of arbitrary forecasts (original scale) against the windows'
/// targets. SMAPE/MASE/OWA are filled when `periodicity` is set; MASE and
/// OWA are NaN when undefined for the data.
MetricsReport score_forecasts(const std::vector<WindowSample>& windows,
                              const std::vector<std::vector<double>>& forecasts,
                              std::optional<std::size_t> periodicity);

MetricsReport evaluate(const Model& model, const std::vector<WindowSample>& test_set,
                       std::optional<std::size_t> periodicity);

/// Seasonal-naive forecasts of each window from its own input.
std::vector<std::vector<double>> naive2_forecasts(const std::vector<WindowSample>& windows,
                                                  std::size_t m);

struct ExperimentResult {
  Model model;
  TrainResult training;
  MetricsReport metrics;
};

/// Split, window, build, train and evaluate in one go.
ExperimentResult run_experiment(const Dataset& ds, const ModelConfig& config,
                                const TrainSpec& spec, const SplitSpec& split,
                                std::optional<std::size_t> periodicity,
                                const std::function<void(const EpochRecord&)>& on_epoch = {});

}  // namespace fppformer
