#include "fpp_cli/run_config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

namespace fpp::cli {

using fppformer::ConfigError;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string fmt_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& key, const std::string& text) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size()) {
    throw ConfigError(key + ": '" + text + "' is not a number");
  }
  return v;
}

std::size_t parse_size(const std::string& key, const std::string& text) {
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size()) {
    throw ConfigError(key + ": '" + text + "' is not a non-negative integer");
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ConfigError(key + ": expected true or false, got '" + text + "'");
}

struct KeyHandler {
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <class Member>
KeyHandler size_key(Member member) {
  return {[member](RunConfig& c, const std::string& k, const std::string& v) {
            std::invoke(member, c) = parse_size(k, v);
          },
          [member](const RunConfig& c) {
            return std::to_string(std::invoke(member, const_cast<RunConfig&>(c)));
          }};
}

template <class Member>
KeyHandler double_key(Member member) {
  return {[member](RunConfig& c, const std::string& k, const std::string& v) {
            std::invoke(member, c) = parse_double(k, v);
          },
          [member](const RunConfig& c) {
            return fmt_double(std::invoke(member, const_cast<RunConfig&>(c)));
          }};
}

template <class Member>
KeyHandler string_key(Member member) {
  return {[member](RunConfig& c, const std::string&, const std::string& v) {
            std::invoke(member, c) = v;
          },
          [member](const RunConfig& c) {
            return std::string(std::invoke(member, const_cast<RunConfig&>(c)));
          }};
}

using Table = std::vector<std::pair<std::string, KeyHandler>>;

const Table& table() {
  static const Table t = [] {
    Table t;
    t.emplace_back("data_path", string_key(&RunConfig::data_path));
    t.emplace_back("dataset_kind",
                   KeyHandler{[](RunConfig& c, const std::string& k, const std::string& v) {
                                if (v != "csv" && v != "synth") {
                                  throw ConfigError(k + ": expected csv or synth, got '" + v + "'");
                                }
                                c.dataset_kind = v;
                              },
                              [](const RunConfig& c) { return c.dataset_kind; }});
    t.emplace_back("input_len", size_key([](RunConfig& c) -> auto& { return c.model.input_len; }));
    t.emplace_back("pred_len", size_key([](RunConfig& c) -> auto& { return c.model.pred_len; }));
    t.emplace_back("stages", size_key([](RunConfig& c) -> auto& { return c.model.stages; }));
    t.emplace_back("patch_size", size_key([](RunConfig& c) -> auto& { return c.model.patch_size; }));
    t.emplace_back("embed_dim", size_key([](RunConfig& c) -> auto& { return c.model.embed_dim; }));
    t.emplace_back("dropout", double_key([](RunConfig& c) -> auto& { return c.model.dropout; }));
    t.emplace_back("feed_forward",
                   KeyHandler{[](RunConfig& c, const std::string& k, const std::string& v) {
                                c.model.feed_forward = parse_bool(k, v);
                              },
                              [](const RunConfig& c) {
                                return std::string(c.model.feed_forward ? "true" : "false");
                              }});
    t.emplace_back("variant",
                   KeyHandler{[](RunConfig& c, const std::string&, const std::string& v) {
                                c.model.variant = fppformer::parse_variant(v);
                              },
                              [](const RunConfig& c) {
                                return std::string(fppformer::variant_name(c.model.variant));
                              }});
    t.emplace_back("batch_size", size_key([](RunConfig& c) -> auto& { return c.train.batch_size; }));
    t.emplace_back("lr", double_key([](RunConfig& c) -> auto& { return c.train.lr; }));
    t.emplace_back("lr_decay", double_key([](RunConfig& c) -> auto& { return c.train.lr_decay; }));
    t.emplace_back("epochs", size_key([](RunConfig& c) -> auto& { return c.train.epochs; }));
    t.emplace_back("patience", size_key([](RunConfig& c) -> auto& { return c.train.patience; }));
    t.emplace_back("seed",
                   KeyHandler{[](RunConfig& c, const std::string& k, const std::string& v) {
                                c.train.seed = parse_size(k, v);
                              },
                              [](const RunConfig& c) { return std::to_string(c.train.seed); }});
    t.emplace_back("n_seeds", size_key(&RunConfig::n_seeds));
    t.emplace_back("split_train", double_key([](RunConfig& c) -> auto& { return c.split.train; }));
    t.emplace_back("split_val", double_key([](RunConfig& c) -> auto& { return c.split.val; }));
    t.emplace_back("split_test", double_key([](RunConfig& c) -> auto& { return c.split.test; }));
    t.emplace_back("periodicity_m",
                   KeyHandler{[](RunConfig& c, const std::string& k, const std::string& v) {
                                const std::size_t m = parse_size(k, v);
                                c.periodicity_m = m == 0 ? std::nullopt : std::optional(m);
                              },
                              [](const RunConfig& c) {
                                return std::to_string(c.periodicity_m.value_or(0));
                              }});
    t.emplace_back("out_dir", string_key(&RunConfig::out_dir));
    t.emplace_back("synth.length", size_key([](RunConfig& c) -> auto& { return c.synth.length; }));
    t.emplace_back("synth.n_vars", size_key([](RunConfig& c) -> auto& { return c.synth.n_vars; }));
    t.emplace_back("synth.components",
                   KeyHandler{[](RunConfig& c, const std::string&, const std::string& v) {
                                c.synth.components = parse_components(v);
                              },
                              [](const RunConfig& c) {
                                std::string out;
                                for (const auto& comp : c.synth.components) {
                                  if (!out.empty()) out += ",";
                                  out += fmt_double(comp.amplitude) + ":" + fmt_double(comp.period) +
                                         ":" + fmt_double(comp.phase);
                                }
                                return out;
                              }});
    t.emplace_back("synth.trend", double_key([](RunConfig& c) -> auto& { return c.synth.trend; }));
    t.emplace_back("synth.noise", double_key([](RunConfig& c) -> auto& { return c.synth.noise; }));
    t.emplace_back("synth.outlier_rate",
                   double_key([](RunConfig& c) -> auto& { return c.synth.outlier_rate; }));
    t.emplace_back("synth.outlier_magnitude",
                   double_key([](RunConfig& c) -> auto& { return c.synth.outlier_magnitude; }));
    t.emplace_back("synth.periodicity",
                   size_key([](RunConfig& c) -> auto& { return c.synth.periodicity; }));
    t.emplace_back("synth.seed",
                   KeyHandler{[](RunConfig& c, const std::string& k, const std::string& v) {
                                c.synth.seed = parse_size(k, v);
                                c.synth_seed_set = true;
                              },
                              [](const RunConfig& c) {
                                return std::to_string(effective_synth(c).seed);
                              }});
    return t;
  }();
  return t;
}

}  // namespace

RunConfig::RunConfig() {
  synth.length = 5000;
  synth.components = {{1.0, 24.0, 0.0}, {0.5, 168.0, 0.0}};
  synth.trend = 1e-4;
  synth.noise = 0.1;
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [name, h] : table()) k.push_back(name);
    return k;
  }();
  return keys;
}

void set_key(RunConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& [name, h] : table()) {
    if (name == key) {
      h.set(cfg, key, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

std::string get_key(const RunConfig& cfg, const std::string& key) {
  for (const auto& [name, h] : table())
    if (name == key) return h.get(cfg);
  throw ConfigError("unknown config key '" + key + "'");
}

void apply_text(RunConfig& cfg, const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(n) + ": expected key = value");
    }
    set_key(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

void apply_file(RunConfig& cfg, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  apply_text(cfg, ss.str(), path.string());
}

void apply_override(RunConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw ConfigError("override '" + assignment + "' must look like key=value");
  }
  set_key(cfg, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void validate(const RunConfig& cfg) {
  cfg.model.validate();
  cfg.train.validate();
  cfg.split.validate();
  if (cfg.n_seeds == 0) throw ConfigError("n_seeds must be positive");
  if (cfg.dataset_kind == "csv" && cfg.data_path.empty()) {
    throw ConfigError("dataset_kind = csv needs data_path");
  }
  if (cfg.dataset_kind == "synth") {
    if (cfg.synth.length == 0 || cfg.synth.n_vars == 0) {
      throw ConfigError("synth.length and synth.n_vars must be positive");
    }
    if (!(cfg.synth.outlier_rate >= 0.0 && cfg.synth.outlier_rate <= 1.0)) {
      throw ConfigError("synth.outlier_rate must lie in [0, 1]");
    }
    if (cfg.synth.noise < 0.0) throw ConfigError("synth.noise must be non-negative");
  }
}

fppformer::SynthSpec effective_synth(const RunConfig& cfg) {
  fppformer::SynthSpec s = cfg.synth;
  if (!cfg.synth_seed_set) s.seed = cfg.train.seed;
  return s;
}

fppformer::Dataset load_dataset(const RunConfig& cfg) {
  if (cfg.dataset_kind == "csv") {
    auto ds = fppformer::load_csv(cfg.data_path);
    if (cfg.periodicity_m) ds.periodicity = *cfg.periodicity_m;
    return ds;
  }
  return fppformer::synth_generate(effective_synth(cfg)).dataset;
}

std::vector<fppformer::SinusoidComponent> parse_components(const std::string& text) {
  std::vector<fppformer::SinusoidComponent> out;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    std::vector<std::string> parts;
    std::istringstream is(item);
    std::string p;
    while (std::getline(is, p, ':')) parts.push_back(trim(p));
    if (parts.size() < 2 || parts.size() > 3) {
      throw ConfigError("synth.components: '" + item + "' must be amplitude:period[:phase]");
    }
    fppformer::SinusoidComponent c;
    c.amplitude = parse_double("synth.components", parts[0]);
    c.period = parse_double("synth.components", parts[1]);
    c.phase = parts.size() == 3 ? parse_double("synth.components", parts[2]) : 0.0;
    if (!(c.period > 0.0)) throw ConfigError("synth.components: period must be positive");
    out.push_back(c);
  }
  return out;
}

}  // namespace fpp::cli
