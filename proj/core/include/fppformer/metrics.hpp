#pragma once

#include <span>
#include <string>
#include <vector>

#include "fppformer/tensor.hpp"

namespace fppformer {

/// A metric's precondition does not hold (e.g. too little history).
struct MetricDomainError : Error {
  using Error::Error;
};

/// The metric's scaling term is zero, e.g. MASE on a constant seasonal series.
struct UndefinedMetricError : NumericalError {
  using NumericalError::NumericalError;
};

struct MetricsReport {
  std::string label;
  double mse = 0.0;
  double mae = 0.0;
  double smape = 0.0;
  double mase = 0.0;  // NaN when not computed or undefined
  double owa = 0.0;   // NaN when not computed or undefined
  std::size_t n_windows = 0;
};

double mse(std::span<const double> pred, std::span<const double> truth);
double mae(std::span<const double> pred, std::span<const double> truth);

/// (200/n) sum |y - x| / (|y| + |x|); terms with a zero denominator count 0.
double smape(std::span<const double> pred, std::span<const double> truth);

/// Mean absolute forecast error over the last pred.size() values of `series`,
/// scaled by the mean seasonal difference |x_j - x_{j-m}| over the whole
/// series (history followed by truths).
double mase(std::span<const double> pred, std::span<const double> series, std::size_t m);

/// Seasonal-naive stand-in for the M4 Naive2 baseline:
/// forecast_t = history[T - m + (t mod m)].
std::vector<double> naive2_forecast(std::span<const double> history, std::size_t m,
                                    std::size_t horizon);

/// 0.5 * (smape / smape_naive2 + mase / mase_naive2).
double owa(double smape_model, double mase_model, double smape_naive2, double mase_naive2);
double owa(const MetricsReport& model, const MetricsReport& naive2);

}  // namespace fppformer
