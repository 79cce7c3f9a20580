#include "fpp_cli/commands.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "fppformer/checkpoint.hpp"
#include "fppformer/metrics.hpp"

namespace fpp::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace fppformer;

namespace {

const std::vector<std::string> kTextKeys = {"data_path", "dataset_kind", "variant", "out_dir",
                                            "synth.components"};

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json config_object(const RunConfig& cfg) {
  json c = json::object();
  for (const auto& key : config_keys()) {
    const std::string v = get_key(cfg, key);
    if (std::find(kTextKeys.begin(), kTextKeys.end(), key) != kTextKeys.end()) {
      c[key] = v;
    } else if (key == "feed_forward") {
      c[key] = v == "true";
    } else if (v.find_first_of(".eE") == std::string::npos && v.find('-') == std::string::npos) {
      c[key] = std::stoull(v);
    } else {
      c[key] = std::stod(v);
    }
  }
  return c;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw DataError("failed writing " + path.string());
}

fs::path prepare_out_dir(const RunConfig& cfg) {
  fs::path dir(cfg.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory " + dir.string() + ": " + ec.message());
  return dir;
}

std::string history_csv(const TrainResult& r) {
  std::string s = "epoch,lr,train_loss,val_loss\n";
  for (const auto& e : r.history) {
    s += std::to_string(e.epoch) + "," + format_double(e.lr) + "," + format_double(e.train_loss) +
         "," + format_double(e.val_loss) + "\n";
  }
  return s;
}

std::vector<WindowSample> windows_for(const Dataset& ds, const ModelConfig& model,
                                      const SplitSpec& split, Split which) {
  return sliding_windows(ds, model.input_len, model.pred_len, split, which);
}

// The window file must hold exactly input_len rows.
Dataset load_window(const fs::path& path, const ModelConfig& model) {
  Dataset w = load_csv(path);
  if (w.length() != model.input_len) {
    throw DataError(path.string() + " has " + std::to_string(w.length()) +
                    " rows; the checkpoint expects input_len = " + std::to_string(model.input_len));
  }
  return w;
}

json report_fields(const MetricsReport& r) {
  json j = json::object();
  j["mse"] = number_or_null(r.mse);
  j["mae"] = number_or_null(r.mae);
  j["smape"] = number_or_null(r.smape);
  j["mase"] = number_or_null(r.mase);
  j["owa"] = number_or_null(r.owa);
  j["n_windows"] = r.n_windows;
  return j;
}

std::vector<Variant> parse_variant_list(const std::string& text) {
  if (text.empty() || text == "all") return all_variants();
  std::vector<Variant> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto comma = text.find(',', pos);
    const std::string item = text.substr(pos, comma == std::string::npos ? std::string::npos
                                                                           : comma - pos);
    if (!item.empty()) out.push_back(parse_variant(item));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  if (out.empty()) throw ConfigError("--variants lists no variant");
  return out;
}

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

std::string metrics_json(const RunConfig& cfg, const MetricsReport& report) {
  json j = json::object();
  j["variant"] = std::string(variant_name(cfg.model.variant));
  j["seed"] = cfg.train.seed;
  for (const auto& f = report_fields(report); auto& [k, v] : f.items()) j[k] = v;
  j["config"] = config_object(cfg);
  return j.dump(2) + "\n";
}

SynthArtifacts cmd_synth(const RunConfig& cfg, std::ostream& out) {
  validate(cfg);
  const SynthSpec spec = effective_synth(cfg);
  auto result = synth_generate(spec);
  SynthArtifacts a;
  if (!cfg.data_path.empty()) {
    a.csv = cfg.data_path;
    if (a.csv.has_parent_path()) fs::create_directories(a.csv.parent_path());
  } else {
    a.csv = prepare_out_dir(cfg) / "synth.csv";
  }
  a.sidecar = a.csv;
  a.sidecar.replace_extension(".outliers.csv");
  write_csv(result.dataset, a.csv);
  write_outlier_sidecar(result.outliers, a.sidecar);
  a.outlier_patches = result.outliers.size();
  out << "wrote " << a.csv.string() << " (" << result.dataset.length() << " rows, "
      << result.dataset.n_vars() << " variables) and " << a.sidecar.string() << " ("
      << a.outlier_patches << " outlier patches)\n";
  return a;
}

TrainArtifacts cmd_train(const RunConfig& cfg, std::ostream& out) {
  validate(cfg);
  const Dataset ds = load_dataset(cfg);
  const auto tr = windows_for(ds, cfg.model, cfg.split, Split::Train);
  const auto va = windows_for(ds, cfg.model, cfg.split, Split::Val);
  const auto te = windows_for(ds, cfg.model, cfg.split, Split::Test);
  const fs::path dir = prepare_out_dir(cfg);

  Model model(cfg.model, cfg.train.seed);
  TrainArtifacts a;
  a.training = train(model, tr, va, cfg.train, [&](const EpochRecord& e) {
    out << "epoch " << e.epoch << " lr " << format_double(e.lr) << " train_loss "
        << format_double(e.train_loss) << " val_loss " << format_double(e.val_loss) << "\n";
  });
  a.report = evaluate(model, te, cfg.periodicity_m);

  a.checkpoint = dir / "model.ckpt";
  a.history = dir / "history.csv";
  a.metrics = dir / "metrics.json";
  save_checkpoint(model, a.checkpoint);
  write_text(a.history, history_csv(a.training));
  write_text(a.metrics, metrics_json(cfg, a.report));
  if (a.training.history.empty()) {
    out << "no epochs run; checkpoint holds the initial parameters\n";
  } else {
    out << "final validation loss " << format_double(a.training.best_val_loss) << " (epoch "
        << a.training.best_epoch << ")\n";
  }
  return a;
}

MetricsReport cmd_eval(const RunConfig& cfg_in, const fs::path& checkpoint, std::ostream& out) {
  validate(cfg_in);
  Model model = load_checkpoint(checkpoint);
  RunConfig cfg = cfg_in;
  cfg.model = model.config();
  const Dataset ds = load_dataset(cfg);
  const auto te = windows_for(ds, cfg.model, cfg.split, Split::Test);
  const MetricsReport report = evaluate(model, te, cfg.periodicity_m);
  const std::string text = metrics_json(cfg, report);
  write_text(prepare_out_dir(cfg) / "eval_metrics.json", text);
  out << text;
  return report;
}

AblationArtifacts cmd_ablate(const RunConfig& cfg_in, const std::vector<Variant>& variants,
                             std::ostream& out) {
  RunConfig cfg = cfg_in;
  validate(cfg);
  for (Variant v : variants) {
    cfg.model.variant = v;
    cfg.model.validate();
  }
  const Dataset ds = load_dataset(cfg);
  const fs::path dir = prepare_out_dir(cfg);

  AblationArtifacts a;
  json arr = json::array();
  std::string csv = "variant,n_seeds,seeds,mse,mae,smape,mase,owa,n_windows\n";
  for (Variant v : variants) {
    cfg.model.variant = v;
    auto r = run_ablation(v, ds, cfg.model, cfg.train, cfg.split, cfg.n_seeds, cfg.periodicity_m,
                          [&](std::uint64_t seed, const MetricsReport& m) {
                            out << variant_name(v) << " seed " << seed << " mse "
                                << format_double(m.mse) << "\n";
                          });
    json row = json::object();
    row["variant"] = std::string(variant_name(v));
    row["n_seeds"] = r.seeds.size();
    row["seeds"] = r.seeds;
    for (const auto& f = report_fields(r.mean); auto& [k, val] : f.items()) row[k] = val;
    json per = json::array();
    for (std::size_t i = 0; i < r.per_seed.size(); ++i) {
      json s = json::object();
      s["seed"] = r.seeds[i];
      for (const auto& f = report_fields(r.per_seed[i]); auto& [k, val] : f.items()) s[k] = val;
      per.push_back(s);
    }
    row["per_seed"] = per;
    arr.push_back(row);

    std::string seeds;
    for (auto s : r.seeds) seeds += (seeds.empty() ? "" : ";") + std::to_string(s);
    csv += std::string(variant_name(v)) + "," + std::to_string(r.seeds.size()) + "," + seeds + "," +
           format_double(r.mean.mse) + "," + format_double(r.mean.mae) + "," +
           format_double(r.mean.smape) + "," + format_double(r.mean.mase) + "," +
           format_double(r.mean.owa) + "," + std::to_string(r.mean.n_windows) + "\n";
    a.results.push_back(std::move(r));
  }
  a.json = dir / "ablation.json";
  a.summary = dir / "ablation_summary.csv";
  write_text(a.json, arr.dump(2) + "\n");
  write_text(a.summary, csv);
  out << csv;
  return a;
}

GradcheckReport cmd_gradcheck(const RunConfig& cfg, const std::optional<std::string>& corrupt,
                              std::ostream& out) {
  ModelConfig mini = gradcheck_mini_config();
  mini.variant = cfg.model.variant;
  mini.dropout = cfg.model.dropout;
  mini.feed_forward = cfg.model.feed_forward;
  GradcheckOptions opts;
  opts.seed = cfg.train.seed;
  opts.corrupt_parameter = corrupt;
  if (corrupt) {
    Model probe(mini, 0);
    const auto& ps = probe.parameters();
    if (std::none_of(ps.begin(), ps.end(), [&](const auto& p) { return p.name == *corrupt; })) {
      throw ConfigError("--corrupt-gradient names unknown parameter '" + *corrupt + "'");
    }
  }
  const GradcheckReport report = model_gradcheck(mini, opts);
  char line[256];
  std::snprintf(line, sizeof(line), "%-36s %8s  %s\n", "parameter", "count", "max_rel_error");
  out << line;
  for (const auto& p : report.parameters) {
    std::snprintf(line, sizeof(line), "%-36s %8zu  %.3e\n", p.name.c_str(), p.count,
                  p.max_rel_error);
    out << line;
  }
  std::snprintf(line, sizeof(line), "worst relative error %.3e at %s\n", report.worst_error,
                report.worst_parameter.c_str());
  out << line << (report.passed() ? "PASS" : "FAIL") << " (threshold 1e-3)\n";
  return report;
}

fs::path cmd_predict(const RunConfig& cfg, const fs::path& checkpoint, const fs::path& window,
                     const fs::path& output) {
  Model model = load_checkpoint(checkpoint);
  const Dataset w = load_window(window, model.config());
  Dataset pred;
  pred.names = w.names;
  for (const auto& col : w.columns) {
    WindowSample s;
    s.input = col;
    const auto norm = revin_normalize(col);
    s.normalized_input = norm.values;
    s.revin_mean = norm.mean;
    s.revin_std = norm.std;
    pred.columns.push_back(predict(model, s));
  }
  fs::path dest = output.empty() ? prepare_out_dir(cfg) / "prediction.csv" : output;
  if (dest.has_parent_path()) fs::create_directories(dest.parent_path());
  write_csv(pred, dest);
  return dest;
}

std::vector<fs::path> cmd_export_attention(const RunConfig& cfg, const fs::path& checkpoint,
                                           const fs::path& window, const fs::path& dir_in,
                                           std::size_t variable) {
  Model model = load_checkpoint(checkpoint);
  const Dataset w = load_window(window, model.config());
  if (variable >= w.n_vars()) {
    throw ConfigError("--variable " + std::to_string(variable) + " out of range; " +
                      window.string() + " has " + std::to_string(w.n_vars()) + " columns");
  }
  const auto norm = revin_normalize(w.columns[variable]);
  std::vector<AttentionCapture> captures;
  {
    NoGradGuard no_grad;
    model.forward(Tensor(Shape{norm.values.size()}, norm.values), {false, nullptr, &captures});
  }
  const fs::path dir = dir_in.empty() ? prepare_out_dir(cfg) / "attention" : dir_in;
  fs::create_directories(dir);
  std::vector<fs::path> written;
  for (const auto& c : captures) {
    const fs::path path = dir / (std::to_string(c.stage) + "_" + c.site + ".csv");
    const std::size_t cols = c.weights.shape().back();
    const auto data = c.weights.data();
    std::string text;
    for (std::size_t i = 0; i < data.size(); ++i) {
      text += format_double(data[i]);
      text += (i + 1) % cols == 0 ? '\n' : ',';
    }
    write_text(path, text);
    written.push_back(path);
  }
  return written;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Pyramid patch-attention forecaster: data synthesis, training and evaluation"};
  app.name(args.empty() ? "fppformer" : fs::path(args[0]).filename().string());
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  auto common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "key = value config file");
    sub->add_option("-s,--set", overrides, "override one key, e.g. --set epochs=3");
  };

  std::string checkpoint, window, output, variants;
  std::string corrupt;
  std::size_t variable = 0;

  auto* synth = app.add_subcommand("synth", "generate a synthetic CSV and its outlier sidecar");
  auto* train_cmd = app.add_subcommand("train", "train, checkpoint and score on the test split");
  auto* eval = app.add_subcommand("eval", "score a checkpoint on the test split");
  auto* ablate = app.add_subcommand("ablate", "train every variant over n_seeds seeds");
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of all gradients");
  auto* predict_cmd = app.add_subcommand("predict", "forecast from one input window");
  auto* attn = app.add_subcommand("export-attention", "dump attention weights for one window");
  for (auto* s : {synth, train_cmd, eval, ablate, gradcheck, predict_cmd, attn}) common(s);
  eval->add_option("--checkpoint", checkpoint)->required();
  ablate->add_option("--variants", variants, "comma-separated variant names (default: all)");
  gradcheck->add_option("--corrupt-gradient", corrupt)->group("");
  for (auto* s : {predict_cmd, attn}) {
    s->add_option("--checkpoint", checkpoint)->required();
    s->add_option("--window", window, "CSV with input_len rows")->required();
    s->add_option("-o,--output", output);
  }
  attn->add_option("--variable", variable, "column of the window file to use");

  try {
    std::vector<std::string> rev(args.begin() + (args.empty() ? 0 : 1), args.end());
    std::reverse(rev.begin(), rev.end());
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    RunConfig cfg;
    if (!config_path.empty()) apply_file(cfg, config_path);
    for (const auto& o : overrides) apply_override(cfg, o);

    if (synth->parsed()) {
      cmd_synth(cfg, out);
    } else if (train_cmd->parsed()) {
      auto a = cmd_train(cfg, out);
      out << "wrote " << a.checkpoint.string() << ", " << a.history.string() << ", "
          << a.metrics.string() << "\n";
    } else if (eval->parsed()) {
      cmd_eval(cfg, checkpoint, out);
    } else if (ablate->parsed()) {
      cmd_ablate(cfg, parse_variant_list(variants), out);
    } else if (gradcheck->parsed()) {
      validate(cfg);
      auto r = cmd_gradcheck(cfg, corrupt.empty() ? std::nullopt : std::optional(corrupt), out);
      return r.passed() ? kExitOk : kExitNumerical;
    } else if (predict_cmd->parsed()) {
      out << "wrote " << cmd_predict(cfg, checkpoint, window, output).string() << "\n";
    } else if (attn->parsed()) {
      auto files = cmd_export_attention(cfg, checkpoint, window, output, variable);
      out << "wrote " << files.size() << " attention files\n";
    }
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const MetricDomainError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ShapeError& e) {
    err << "shape error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const fs::filesystem_error& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace fpp::cli
