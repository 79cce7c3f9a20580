#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace fppformer {

/// T x V numeric series, stored column by column.
struct Dataset {
  std::vector<std::string> names;
  std::vector<std::vector<double>> columns;
  std::vector<std::string> dates;  // empty when the file had no date column
  std::string frequency;
  std::size_t periodicity = 1;

  std::size_t length() const { return columns.empty() ? 0 : columns.front().size(); }
  std::size_t n_vars() const { return columns.size(); }
};

/// Header row required; a first column named "date" is kept aside. Every
/// other cell must parse as a finite number.
Dataset load_csv(const std::filesystem::path& path);
void write_csv(const Dataset& ds, const std::filesystem::path& path);

inline constexpr double kRevinEps = 1e-5;

struct RevinResult {
  std::vector<double> values;
  double mean = 0.0;
  double std = 0.0;  // population std, clamped below at kRevinEps
};

RevinResult revin_normalize(std::span<const double> window);
std::vector<double> revin_denormalize(std::span<const double> pred, double mean, double std);

struct SplitSpec {
  double train = 0.7;
  double val = 0.1;
  double test = 0.2;

  void validate() const;
};

enum class Split { Train = 0, Val = 1, Test = 2 };
const char* split_name(Split s);

struct SplitRange {
  std::size_t begin = 0;
  std::size_t end = 0;  // exclusive
};

/// Chronological row ranges of the three segments of a length-T series.
std::array<SplitRange, 3> split_ranges(std::size_t length, const SplitSpec& spec);

struct WindowSample {
  std::vector<double> input;             // raw, length L
  std::vector<double> target;            // raw, length H
  std::vector<double> normalized_input;  // RevIN of input
  std::vector<double> normalized_target; // target under the input's statistics
  double revin_mean = 0.0;
  double revin_std = 1.0;
  std::size_t start = 0;     // t1; the target begins at start + L
  std::size_t variable = 0;
};

/// Channel-independent windows of one split, ordered by start then variable.
/// No window crosses the split boundary.
std::vector<WindowSample> sliding_windows(const Dataset& ds, std::size_t input_len,
                                          std::size_t pred_len, const SplitSpec& spec, Split split,
                                          std::size_t stride = 1);

/// Window positions available in a segment of `rows` rows.
std::size_t window_count(std::size_t rows, std::size_t input_len, std::size_t pred_len,
                         std::size_t stride);

}  // namespace fppformer
