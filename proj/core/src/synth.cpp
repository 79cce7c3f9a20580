#include "fppformer/synth.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include "fppformer/tensor.hpp"

namespace fppformer {

SynthResult synth_generate(const SynthSpec& spec) {
  if (spec.length == 0) throw ConfigError("synth.length must be positive");
  if (spec.n_vars == 0) throw ConfigError("synth.n_vars must be positive");
  for (const auto& c : spec.components) {
    if (!(c.period > 0.0)) throw ConfigError("synth component periods must be positive");
  }
  if (!(spec.outlier_rate >= 0.0 && spec.outlier_rate <= 1.0)) {
    throw ConfigError("synth.outlier_rate must lie in [0, 1]");
  }
  if (spec.noise < 0.0) throw ConfigError("synth.noise must be non-negative");

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double start_prob = spec.outlier_rate / static_cast<double>(kOutlierPatchLen);

  SynthResult r;
  r.dataset.frequency = "synthetic";
  r.dataset.periodicity = spec.periodicity;
  for (std::size_t v = 0; v < spec.n_vars; ++v) {
    r.dataset.names.push_back("var" + std::to_string(v));
    std::vector<double> col(spec.length);
    const double shift = static_cast<double>(v) * std::numbers::pi / 4.0;
    for (std::size_t t = 0; t < spec.length; ++t) {
      const double td = static_cast<double>(t);
      double x = spec.trend * td;
      for (const auto& c : spec.components) {
        x += c.amplitude * std::sin(2.0 * std::numbers::pi * td / c.period + c.phase + shift);
      }
      if (spec.noise > 0.0) x += spec.noise * gauss(rng);
      col[t] = x;
    }
    if (start_prob > 0.0) {
      std::size_t t = 0;
      while (t + kOutlierPatchLen <= spec.length) {
        if (u(rng) < start_prob) {
          for (std::size_t k = 0; k < kOutlierPatchLen; ++k) col[t + k] += spec.outlier_magnitude;
          r.outliers.push_back({v, t, kOutlierPatchLen});
          t += kOutlierPatchLen;
        } else {
          ++t;
        }
      }
    }
    r.dataset.columns.push_back(std::move(col));
  }
  return r;
}

void write_outlier_sidecar(const std::vector<OutlierPatch>& outliers,
                           const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out << "variable,start,length\n";
  for (const auto& o : outliers) out << o.variable << ',' << o.start << ',' << o.length << '\n';
}

}  // namespace fppformer
