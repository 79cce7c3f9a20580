#include "fppformer/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "fppformer/tensor.hpp"

namespace fppformer {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string trim(std::string s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

}  // namespace

Dataset load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || trim(line).empty()) {
    throw DataError(path.string() + " is empty");
  }
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // BOM
  auto header = split_fields(line);
  for (auto& h : header) h = trim(h);
  const bool has_date = !header.empty() && header.front() == "date";
  const std::size_t first = has_date ? 1 : 0;
  if (header.size() <= first) throw DataError(path.string() + " has no numeric columns");

  Dataset ds;
  ds.names.assign(header.begin() + static_cast<std::ptrdiff_t>(first), header.end());
  ds.columns.resize(ds.names.size());
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    auto fields = split_fields(line);
    if (fields.size() != header.size()) {
      throw DataError(path.string() + ": row " + std::to_string(row) + " has " +
                      std::to_string(fields.size()) + " fields, header has " +
                      std::to_string(header.size()));
    }
    if (has_date) ds.dates.push_back(trim(fields[0]));
    for (std::size_t c = first; c < fields.size(); ++c) {
      const std::string cell = trim(fields[c]);
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(v)) {
        throw DataError(path.string() + ": cannot parse '" + cell + "' at row " +
                        std::to_string(row) + ", column " + std::to_string(c + 1) + " (" +
                        header[c] + ")");
      }
      ds.columns[c - first].push_back(v);
    }
  }
  if (ds.length() == 0) throw DataError(path.string() + " has a header but no data rows");
  return ds;
}

void write_csv(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  const bool has_date = !ds.dates.empty();
  if (has_date) out << "date";
  for (std::size_t v = 0; v < ds.n_vars(); ++v) out << (v || has_date ? "," : "") << ds.names[v];
  out << '\n';
  char buf[64];
  for (std::size_t t = 0; t < ds.length(); ++t) {
    if (has_date) out << ds.dates[t];
    for (std::size_t v = 0; v < ds.n_vars(); ++v) {
      const auto res = std::to_chars(buf, buf + sizeof(buf), ds.columns[v][t],
                                     std::chars_format::general, 17);
      out << (v || has_date ? "," : "") << std::string_view(buf, res.ptr - buf);
    }
    out << '\n';
  }
}

RevinResult revin_normalize(std::span<const double> window) {
  RevinResult r;
  const double n = static_cast<double>(window.size());
  double mu = 0.0;
  for (double x : window) mu += x;
  mu /= n;
  double var = 0.0;
  for (double x : window) var += (x - mu) * (x - mu);
  var /= n;
  r.mean = mu;
  r.std = std::max(std::sqrt(var), kRevinEps);
  r.values.reserve(window.size());
  for (double x : window) r.values.push_back((x - mu) / r.std);
  return r;
}

std::vector<double> revin_denormalize(std::span<const double> pred, double mean, double std) {
  const double s = std::max(std, kRevinEps);
  std::vector<double> out;
  out.reserve(pred.size());
  for (double x : pred) out.push_back(x * s + mean);
  return out;
}

void SplitSpec::validate() const {
  if (!(train > 0.0 && val > 0.0 && test > 0.0)) {
    throw ConfigError("split fractions must all be positive");
  }
  if (std::fabs(train + val + test - 1.0) > 1e-9) {
    throw ConfigError("split fractions must sum to 1");
  }
}

const char* split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "?";
}

std::array<SplitRange, 3> split_ranges(std::size_t length, const SplitSpec& spec) {
  spec.validate();
  const double t = static_cast<double>(length);
  const auto train_end = static_cast<std::size_t>(std::floor(t * spec.train + 1e-9));
  const auto val_end = static_cast<std::size_t>(std::floor(t * (spec.train + spec.val) + 1e-9));
  return {SplitRange{0, train_end}, SplitRange{train_end, std::min(val_end, length)},
          SplitRange{std::min(val_end, length), length}};
}

std::size_t window_count(std::size_t rows, std::size_t input_len, std::size_t pred_len,
                         std::size_t stride) {
  if (rows < input_len + pred_len) return 0;
  return (rows - input_len - pred_len) / stride + 1;
}

std::vector<WindowSample> sliding_windows(const Dataset& ds, std::size_t input_len,
                                          std::size_t pred_len, const SplitSpec& spec, Split split,
                                          std::size_t stride) {
  if (stride == 0) throw ConfigError("window stride must be positive");
  if (input_len < 2) throw ConfigError("input_len must be at least 2 for RevIN");
  const auto range = split_ranges(ds.length(), spec)[static_cast<int>(split)];
  const std::size_t rows = range.end - range.begin;
  const std::size_t n = window_count(rows, input_len, pred_len, stride);
  if (n == 0) {
    throw DataError(std::string(split_name(split)) + " segment has " + std::to_string(rows) +
                    " rows, fewer than input_len + pred_len = " +
                    std::to_string(input_len + pred_len));
  }
  std::vector<WindowSample> out;
  out.reserve(n * ds.n_vars());
  for (std::size_t w = 0; w < n; ++w) {
    const std::size_t start = range.begin + w * stride;
    for (std::size_t v = 0; v < ds.n_vars(); ++v) {
      const auto& col = ds.columns[v];
      WindowSample s;
      s.start = start;
      s.variable = v;
      s.input.assign(col.begin() + static_cast<std::ptrdiff_t>(start),
                     col.begin() + static_cast<std::ptrdiff_t>(start + input_len));
      s.target.assign(col.begin() + static_cast<std::ptrdiff_t>(start + input_len),
                      col.begin() + static_cast<std::ptrdiff_t>(start + input_len + pred_len));
      auto norm = revin_normalize(s.input);
      s.normalized_input = std::move(norm.values);
      s.revin_mean = norm.mean;
      s.revin_std = norm.std;
      s.normalized_target.reserve(pred_len);
      for (double x : s.target) s.normalized_target.push_back((x - s.revin_mean) / s.revin_std);
      out.push_back(std::move(s));
    }
  }
  return out;
}

}  // namespace fppformer
