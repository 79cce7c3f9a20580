#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fppformer/data.hpp"
#include "fppformer/model.hpp"
#include "fppformer/synth.hpp"
#include "fppformer/train.hpp"

namespace fpp::cli {

/// Everything a subcommand needs, assembled from a `key = value` file and
/// `--set key=value` overrides.
struct RunConfig {
  std::string data_path;
  std::string dataset_kind = "synth";  // csv | synth
  fppformer::ModelConfig model;
  fppformer::TrainSpec train;
  fppformer::SplitSpec split;
  std::optional<std::size_t> periodicity_m = 24;  // 0 in a file disables SMAPE/MASE/OWA
  std::string out_dir = "out";
  std::size_t n_seeds = 1;
  fppformer::SynthSpec synth;
  bool synth_seed_set = false;

  RunConfig();
};

/// Every recognised key, in the order they are echoed back.
const std::vector<std::string>& config_keys();

/// Applies one assignment; throws ConfigError for unknown keys or bad values.
void set_key(RunConfig& cfg, const std::string& key, const std::string& value);

/// Parses `key = value` lines; `#` starts a comment.
void apply_text(RunConfig& cfg, const std::string& text, const std::string& origin = "config");
void apply_file(RunConfig& cfg, const std::filesystem::path& path);
/// `key=value` as given on the command line.
void apply_override(RunConfig& cfg, const std::string& assignment);

/// Checks every model, training and split invariant before any work starts.
void validate(const RunConfig& cfg);

/// Current value of `key` as text, in the same syntax the file accepts.
std::string get_key(const RunConfig& cfg, const std::string& key);

/// Dataset named by the config: the CSV at data_path, or a generated series.
fppformer::Dataset load_dataset(const RunConfig& cfg);
fppformer::SynthSpec effective_synth(const RunConfig& cfg);

std::vector<fppformer::SinusoidComponent> parse_components(const std::string& text);

}  // namespace fpp::cli
