#include "fppformer/metrics.hpp"

#include <cmath>

namespace fppformer {

namespace {

void check_lengths(std::span<const double> a, std::span<const double> b, const char* name) {
  if (a.empty() || a.size() != b.size()) {
    throw MetricDomainError(std::string(name) + ": need equal non-zero lengths, got " +
                            std::to_string(a.size()) + " and " + std::to_string(b.size()));
  }
}

}  // namespace

double mse(std::span<const double> pred, std::span<const double> truth) {
  check_lengths(pred, truth, "mse");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += (pred[i] - truth[i]) * (pred[i] - truth[i]);
  return s / static_cast<double>(pred.size());
}

double mae(std::span<const double> pred, std::span<const double> truth) {
  check_lengths(pred, truth, "mae");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += std::fabs(pred[i] - truth[i]);
  return s / static_cast<double>(pred.size());
}

double smape(std::span<const double> pred, std::span<const double> truth) {
  check_lengths(pred, truth, "smape");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double den = std::fabs(pred[i]) + std::fabs(truth[i]);
    if (den > 0.0) s += std::fabs(pred[i] - truth[i]) / den;
  }
  return 200.0 * s / static_cast<double>(pred.size());
}

double mase(std::span<const double> pred, std::span<const double> series, std::size_t m) {
  if (pred.empty() || pred.size() > series.size()) {
    throw MetricDomainError("mase: prediction of length " + std::to_string(pred.size()) +
                            " does not fit a series of length " + std::to_string(series.size()));
  }
  const std::size_t history = series.size() - pred.size();
  if (m == 0 || m >= history) {
    throw MetricDomainError("mase: periodicity " + std::to_string(m) +
                            " must be positive and below the history length " +
                            std::to_string(history));
  }
  double scale = 0.0;
  for (std::size_t j = m; j < series.size(); ++j) scale += std::fabs(series[j] - series[j - m]);
  scale /= static_cast<double>(series.size() - m);
  if (scale == 0.0) {
    throw UndefinedMetricError("mase: seasonal differences are all zero; MASE is undefined");
  }
  double err = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) err += std::fabs(pred[i] - series[history + i]);
  return err / static_cast<double>(pred.size()) / scale;
}

std::vector<double> naive2_forecast(std::span<const double> history, std::size_t m,
                                    std::size_t horizon) {
  if (m == 0 || history.size() < m) {
    throw MetricDomainError("naive2: history of length " + std::to_string(history.size()) +
                            " is shorter than periodicity " + std::to_string(m));
  }
  std::vector<double> out(horizon);
  const std::size_t base = history.size() - m;
  for (std::size_t t = 0; t < horizon; ++t) out[t] = history[base + t % m];
  return out;
}

double owa(double smape_model, double mase_model, double smape_naive2, double mase_naive2) {
  if (smape_naive2 == 0.0 || mase_naive2 == 0.0) {
    throw UndefinedMetricError("owa: naive2 SMAPE or MASE is zero; OWA is undefined");
  }
  return 0.5 * (smape_model / smape_naive2 + mase_model / mase_naive2);
}

double owa(const MetricsReport& model, const MetricsReport& naive2) {
  return owa(model.smape, model.mase, naive2.smape, naive2.mase);
}

}  // namespace fppformer
