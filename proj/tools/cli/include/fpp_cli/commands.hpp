#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "fpp_cli/run_config.hpp"
#include "fppformer/ablation.hpp"
#include "fppformer/gradcheck.hpp"

namespace fpp::cli {

// Exit-code contract.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumerical = 4;

/// Full command line, argv[0] included. Never throws; returns the exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

struct SynthArtifacts {
  std::filesystem::path csv;
  std::filesystem::path sidecar;
  std::size_t outlier_patches = 0;
};

struct TrainArtifacts {
  std::filesystem::path checkpoint;
  std::filesystem::path history;
  std::filesystem::path metrics;
  fppformer::TrainResult training;
  fppformer::MetricsReport report;
};

struct AblationArtifacts {
  std::filesystem::path json;
  std::filesystem::path summary;
  std::vector<fppformer::AblationResult> results;
};

SynthArtifacts cmd_synth(const RunConfig& cfg, std::ostream& out);
TrainArtifacts cmd_train(const RunConfig& cfg, std::ostream& out);
fppformer::MetricsReport cmd_eval(const RunConfig& cfg, const std::filesystem::path& checkpoint,
                                  std::ostream& out);
AblationArtifacts cmd_ablate(const RunConfig& cfg, const std::vector<fppformer::Variant>& variants,
                             std::ostream& out);
fppformer::GradcheckReport cmd_gradcheck(const RunConfig& cfg,
                                         const std::optional<std::string>& corrupt,
                                         std::ostream& out);
std::filesystem::path cmd_predict(const RunConfig& cfg, const std::filesystem::path& checkpoint,
                                  const std::filesystem::path& window,
                                  const std::filesystem::path& output);
std::vector<std::filesystem::path> cmd_export_attention(const RunConfig& cfg,
                                                        const std::filesystem::path& checkpoint,
                                                        const std::filesystem::path& window,
                                                        const std::filesystem::path& dir,
                                                        std::size_t variable = 0);

/// {"variant", "seed", "mse", "mae", "smape", "mase", "owa", "n_windows", "config"}.
std::string metrics_json(const RunConfig& cfg, const fppformer::MetricsReport& report);

/// 17 significant digits; "nan" for NaN.
std::string format_double(double v);

}  // namespace fpp::cli
