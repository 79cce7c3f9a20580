#include "fppformer/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace fppformer {

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[4] = {'F', 'P', 'P', 'F'};

template <class T>
void put(std::ostream& os, T value) {
  os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <class T>
T get(std::istream& is, const std::filesystem::path& path) {
  T value{};
  if (!is.read(reinterpret_cast<char*>(&value), sizeof(T))) {
    throw DataError("checkpoint " + path.string() + " is truncated");
  }
  return value;
}

}  // namespace

std::filesystem::path manifest_path(const std::filesystem::path& checkpoint) {
  return std::filesystem::path(checkpoint.string() + ".manifest");
}

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot open " + path.string() + " for writing");
  const auto& c = model.config();
  os.write(kMagic, 4);
  put<std::uint32_t>(os, kCheckpointVersion);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(c.input_len));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(c.pred_len));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(c.stages));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(c.patch_size));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(c.embed_dim));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(c.variant));
  put<std::uint32_t>(os, c.feed_forward ? 1u : 0u);
  put<double>(os, c.dropout);
  put<std::uint64_t>(os, model.parameter_count());
  const auto header_bytes = static_cast<std::uint64_t>(os.tellp());

  std::ofstream manifest(manifest_path(path), std::ios::trunc);
  if (!manifest) throw DataError("cannot open manifest for " + path.string());
  manifest << "# name shape offset_bytes count\n";
  std::uint64_t offset = header_bytes;
  for (const auto& p : model.parameters()) {
    for (double v : p.tensor.data()) put<double>(os, v);
    manifest << p.name << ' ' << shape_str(p.tensor.shape()) << ' ' << offset << ' '
             << p.tensor.numel() << '\n';
    offset += p.tensor.numel() * sizeof(double);
  }
  if (!os) throw DataError("failed writing checkpoint " + path.string());
}

Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw DataError(path.string() + " is not an FPPF checkpoint");
  }
  const auto version = get<std::uint32_t>(is, path);
  if (version != kCheckpointVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  }
  ModelConfig c;
  c.input_len = get<std::uint32_t>(is, path);
  c.pred_len = get<std::uint32_t>(is, path);
  c.stages = get<std::uint32_t>(is, path);
  c.patch_size = get<std::uint32_t>(is, path);
  c.embed_dim = get<std::uint32_t>(is, path);
  const auto variant = get<std::uint32_t>(is, path);
  if (variant > static_cast<std::uint32_t>(Variant::NoDM)) {
    throw DataError("checkpoint names unknown variant " + std::to_string(variant));
  }
  c.variant = static_cast<Variant>(variant);
  c.feed_forward = get<std::uint32_t>(is, path) != 0;
  c.dropout = get<double>(is, path);
  const auto count = get<std::uint64_t>(is, path);

  Model model(c, 0);
  if (count != model.parameter_count()) {
    throw DataError("checkpoint holds " + std::to_string(count) + " values, config needs " +
                    std::to_string(model.parameter_count()));
  }
  std::vector<std::vector<double>> values;
  for (const auto& p : model.parameters()) {
    std::vector<double> v(p.tensor.numel());
    if (!is.read(reinterpret_cast<char*>(v.data()),
                 static_cast<std::streamsize>(v.size() * sizeof(double)))) {
      throw DataError("checkpoint " + path.string() + " is truncated");
    }
    values.push_back(std::move(v));
  }
  model.restore(values);
  return model;
}

}  // namespace fppformer
