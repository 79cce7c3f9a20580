#include "fppformer/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "fppformer/optim.hpp"

namespace fppformer {

namespace {

Tensor as_tensor(const std::vector<double>& v) { return Tensor(Shape{v.size()}, v); }

constexpr std::uint64_t kDropoutStream = 0x9E3779B97F4A7C15ull;

// Windows per no-grad forward pass during validation and evaluation.
constexpr std::size_t kEvalChunk = 64;

// Stacks one field of the selected windows into [n, len].
template <class Field>
Tensor stack(const std::vector<WindowSample>& windows, const std::size_t* idx, std::size_t n,
             Field field) {
  const std::size_t len = (windows[idx[0]].*field).size();
  std::vector<double> out;
  out.reserve(n * len);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& v = windows[idx[i]].*field;
    out.insert(out.end(), v.begin(), v.end());
  }
  return Tensor(Shape{n, len}, std::move(out));
}

std::vector<std::size_t> iota_indices(std::size_t n) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  return idx;
}

}  // namespace

void TrainSpec::validate() const {
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(lr > 0.0)) throw ConfigError("lr must be positive");
  if (!(lr_decay > 0.0)) throw ConfigError("lr decay must be positive");
  if (patience == 0) throw ConfigError("patience must be positive");
  if (epochs > 0 && patience > epochs) throw ConfigError("patience must not exceed epochs");
}

double TrainSpec::lr_at(std::size_t epoch) const {
  return lr * std::pow(lr_decay, static_cast<double>(epoch));
}

double validation_loss(const Model& model, const std::vector<WindowSample>& windows) {
  if (windows.empty()) throw DataError("validation stream is empty");
  NoGradGuard no_grad;
  const auto idx = iota_indices(windows.size());
  double total = 0.0;
  for (std::size_t b = 0; b < idx.size(); b += kEvalChunk) {
    const std::size_t n = std::min(kEvalChunk, idx.size() - b);
    Tensor pred = model.forward(stack(windows, idx.data() + b, n, &WindowSample::normalized_input));
    Tensor target = stack(windows, idx.data() + b, n, &WindowSample::normalized_target);
    total += forecast_loss(pred, target).item() * static_cast<double>(n);
  }
  return total / static_cast<double>(windows.size());
}

TrainResult train(Model& model, const std::vector<WindowSample>& train_set,
                  const std::vector<WindowSample>& val_set, const TrainSpec& spec,
                  const std::function<void(const EpochRecord&)>& on_epoch) {
  spec.validate();
  if (train_set.empty()) throw DataError("training stream is empty");
  if (val_set.empty()) throw DataError("validation stream is empty");

  TrainResult result;
  result.best_val_loss = std::numeric_limits<double>::infinity();
  if (spec.epochs == 0) return result;

  auto params = model.parameter_tensors();
  AdamState adam(params, spec.lr);
  Rng shuffle_rng(spec.seed);
  Rng dropout_rng(spec.seed ^ kDropoutStream);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  auto best = model.snapshot();
  std::size_t since_best = 0;

  for (std::size_t epoch = 0; epoch < spec.epochs; ++epoch) {
    adam.lr = spec.lr_at(epoch);
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    for (std::size_t b = 0; b < order.size(); b += spec.batch_size) {
      const std::size_t end = std::min(order.size(), b + spec.batch_size);
      const std::size_t n = end - b;
      model.zero_grad();
      // Every window has H targets, so the mean over the stacked batch equals
      // the mean of the per-window losses.
      ForwardOptions opts{true, &dropout_rng, nullptr};
      Tensor pred =
          model.forward(stack(train_set, order.data() + b, n, &WindowSample::normalized_input), opts);
      Tensor loss =
          forecast_loss(pred, stack(train_set, order.data() + b, n, &WindowSample::normalized_target));
      const double value = loss.item();
      if (!std::isfinite(value)) {
        throw NumericalError("training loss became non-finite in epoch " + std::to_string(epoch));
      }
      loss_sum += value * static_cast<double>(n);
      backward(loss);
      adam_step(params, adam);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = adam.lr;
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    rec.val_loss = validation_loss(model, val_set);
    if (!std::isfinite(rec.val_loss)) {
      throw NumericalError("validation loss became non-finite in epoch " + std::to_string(epoch));
    }
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);

    if (rec.val_loss < result.best_val_loss) {
      result.best_val_loss = rec.val_loss;
      result.best_epoch = epoch;
      best = model.snapshot();
      since_best = 0;
    } else if (++since_best >= spec.patience) {
      result.stopped_early = epoch + 1 < spec.epochs;
      break;
    }
  }
  model.restore(best);
  model.zero_grad();
  return result;
}

std::vector<double> predict(const Model& model, const WindowSample& window) {
  NoGradGuard no_grad;
  Tensor pred = model.forward(as_tensor(window.normalized_input));
  return revin_denormalize(pred.data(), window.revin_mean, window.revin_std);
}

std::vector<std::vector<double>> predict_all(const Model& model,
                                             const std::vector<WindowSample>& windows) {
  NoGradGuard no_grad;
  const auto idx = iota_indices(windows.size());
  const std::size_t h = model.config().pred_len;
  std::vector<std::vector<double>> out;
  out.reserve(windows.size());
  for (std::size_t b = 0; b < idx.size(); b += kEvalChunk) {
    const std::size_t n = std::min(kEvalChunk, idx.size() - b);
    Tensor pred = model.forward(stack(windows, idx.data() + b, n, &WindowSample::normalized_input));
    const auto pd = pred.data();
    for (std::size_t i = 0; i < n; ++i) {
      const auto& w = windows[b + i];
      out.push_back(revin_denormalize(pd.subspan(i * h, h), w.revin_mean, w.revin_std));
    }
  }
  return out;
}

std::vector<std::vector<double>> naive2_forecasts(const std::vector<WindowSample>& windows,
                                                  std::size_t m) {
  std::vector<std::vector<double>> out;
  out.reserve(windows.size());
  for (const auto& w : windows) out.push_back(naive2_forecast(w.input, m, w.target.size()));
  return out;
}

MetricsReport score_forecasts(const std::vector<WindowSample>& windows,
                              const std::vector<std::vector<double>>& forecasts,
                              std::optional<std::size_t> periodicity) {
  if (windows.empty()) throw DataError("test stream is empty");
  if (forecasts.size() != windows.size()) {
    throw ShapeError("score_forecasts: " + std::to_string(forecasts.size()) + " forecasts for " +
                     std::to_string(windows.size()) + " windows");
  }
  MetricsReport r;
  r.n_windows = windows.size();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  double se = 0.0, ae = 0.0;
  std::size_t points = 0;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const auto& truth = windows[i].target;
    const auto& pred = forecasts[i];
    if (pred.size() != truth.size()) {
      throw ShapeError("score_forecasts: forecast length " + std::to_string(pred.size()) +
                       " differs from target length " + std::to_string(truth.size()));
    }
    for (std::size_t t = 0; t < truth.size(); ++t) {
      const double d = pred[t] - truth[t];
      se += d * d;
      ae += std::fabs(d);
    }
    points += truth.size();
  }
  r.mse = se / static_cast<double>(points);
  r.mae = ae / static_cast<double>(points);
  r.smape = nan;
  r.mase = nan;
  r.owa = nan;
  if (!periodicity) return r;

  const std::size_t m = *periodicity;
  auto naive = naive2_forecasts(windows, m);
  double s = 0.0, s_naive = 0.0, ms = 0.0, ms_naive = 0.0;
  bool mase_defined = true;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const auto& w = windows[i];
    s += smape(forecasts[i], w.target);
    s_naive += smape(naive[i], w.target);
    if (!mase_defined) continue;
    std::vector<double> series = w.input;
    series.insert(series.end(), w.target.begin(), w.target.end());
    try {
      ms += mase(forecasts[i], series, m);
      ms_naive += mase(naive[i], series, m);
    } catch (const UndefinedMetricError&) {
      mase_defined = false;
    }
  }
  const double n = static_cast<double>(windows.size());
  r.smape = s / n;
  if (mase_defined) {
    r.mase = ms / n;
    try {
      r.owa = owa(r.smape, r.mase, s_naive / n, ms_naive / n);
    } catch (const UndefinedMetricError&) {
      r.owa = nan;
    }
  }
  return r;
}

MetricsReport evaluate(const Model& model, const std::vector<WindowSample>& test_set,
                       std::optional<std::size_t> periodicity) {
  if (test_set.empty()) throw DataError("test stream is empty");
  auto forecasts = predict_all(model, test_set);
  auto r = score_forecasts(test_set, forecasts, periodicity);
  r.label = std::string(variant_name(model.config().variant));
  return r;
}

ExperimentResult run_experiment(const Dataset& ds, const ModelConfig& config,
                                const TrainSpec& spec, const SplitSpec& split,
                                std::optional<std::size_t> periodicity,
                                const std::function<void(const EpochRecord&)>& on_epoch) {
  config.validate();
  const auto tr = sliding_windows(ds, config.input_len, config.pred_len, split, Split::Train);
  const auto va = sliding_windows(ds, config.input_len, config.pred_len, split, Split::Val);
  const auto te = sliding_windows(ds, config.input_len, config.pred_len, split, Split::Test);
  Model model(config, spec.seed);
  auto training = train(model, tr, va, spec, on_epoch);
  auto metrics = evaluate(model, te, periodicity);
  return {std::move(model), std::move(training), std::move(metrics)};
}

}  // namespace fppformer
