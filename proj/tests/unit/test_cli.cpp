#include <json.hpp>

#include "fpp_cli/commands.hpp"
#include "fppformer/checkpoint.hpp"
#include "fppformer/metrics.hpp"
#include "test_util.hpp"

using namespace fppformer;
using namespace fpptest;
using namespace fpp::cli;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = 0;
  std::string out, err;
};

Outcome run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "fppformer");
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

// Small synthetic setup that trains in well under a second.
std::string small_config(const fs::path& out_dir) {
  return "# test setup\n"
         "input_len = 24\npred_len = 24\nstages = 2\npatch_size = 6\nembed_dim = 4\n"
         "epochs = 2\nbatch_size = 16\nlr = 1e-3\nperiodicity_m = 12\n"
         "synth.length = 600\nsynth.components = 1:24, 0.5:12:0.4\nsynth.noise = 0.1\n"
         "out_dir = " + out_dir.string() + "\n";
}

RunConfig config_from(const std::string& text) {
  RunConfig cfg;
  apply_text(cfg, text);
  return cfg;
}

fs::path write_config(const fs::path& dir, const std::string& extra = "") {
  write_file(dir / "run.cfg", small_config(dir / "out") + extra);
  return dir / "run.cfg";
}

std::vector<std::vector<double>> read_matrix(const fs::path& p) {
  std::vector<std::vector<double>> rows;
  std::istringstream in(read_file(p));
  std::string line;
  while (std::getline(in, line)) {
    std::vector<double> row;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) row.push_back(std::stod(cell));
    rows.push_back(row);
  }
  return rows;
}

// Window CSV holding the first test window of every variable.
fs::path write_window(const RunConfig& cfg, const fs::path& dir) {
  Dataset ds = load_dataset(cfg);
  auto te = sliding_windows(ds, cfg.model.input_len, cfg.model.pred_len, cfg.split, Split::Test);
  Dataset w;
  w.names = ds.names;
  for (std::size_t v = 0; v < ds.n_vars(); ++v) w.columns.push_back(te[v].input);
  write_csv(w, dir / "window.csv");
  return dir / "window.csv";
}

}  // namespace

TEST(RunConfig, DefaultsFollowTheReferenceSettings) {
  RunConfig c;
  EXPECT_EQ(c.model.stages, 3u);
  EXPECT_EQ(c.model.patch_size, 6u);
  EXPECT_EQ(c.model.embed_dim, 32u);
  EXPECT_EQ(c.model.dropout, 0.1);
  EXPECT_EQ(c.train.batch_size, 16u);
  EXPECT_EQ(c.train.lr, 1e-4);
  EXPECT_EQ(c.train.epochs, 10u);
  EXPECT_EQ(c.train.patience, 1u);
  EXPECT_NO_THROW(validate(c));
}

TEST(RunConfig, ParsesKeyValueLinesAndComments) {
  RunConfig c = config_from("  epochs = 3   # short run\n\n# full-line comment\nlr=0.5\n"
                            "variant = no_dm\nsynth.components = 2:24:0.1,1:168\nperiodicity_m = 0\n");
  EXPECT_EQ(c.train.epochs, 3u);
  EXPECT_EQ(c.train.lr, 0.5);
  EXPECT_EQ(c.model.variant, Variant::NoDM);
  ASSERT_EQ(c.synth.components.size(), 2u);
  EXPECT_EQ(c.synth.components[1].period, 168.0);
  EXPECT_EQ(c.synth.components[1].phase, 0.0);
  EXPECT_FALSE(c.periodicity_m.has_value());
}

TEST(RunConfig, EveryKeyRoundTripsThroughItsText) {
  RunConfig c = config_from("lr = 0.1\nsynth.seed = 5\nsplit_train = 0.6\nsplit_val = 0.2\n"
                            "split_test = 0.2\nfeed_forward = false\n");
  std::string text;
  for (const auto& k : config_keys()) text += k + " = " + get_key(c, k) + "\n";
  RunConfig back = config_from(text);
  for (const auto& k : config_keys()) EXPECT_EQ(get_key(back, k), get_key(c, k)) << k;
}

TEST(RunConfig, OverridesWinOverTheFile) {
  auto dir = scratch_dir("cli_override");
  auto cfg_path = write_config(dir);
  RunConfig c;
  apply_file(c, cfg_path);
  apply_override(c, "epochs=7");
  EXPECT_EQ(c.train.epochs, 7u);
  EXPECT_THROW(apply_override(c, "epochs"), ConfigError);
}

TEST(RunConfig, BadInputIsAConfigError) {
  RunConfig c;
  EXPECT_THROW(apply_text(c, "no_such_key = 1\n"), ConfigError);
  EXPECT_THROW(apply_text(c, "epochs = -1\n"), ConfigError);
  EXPECT_THROW(apply_text(c, "lr = fast\n"), ConfigError);
  EXPECT_THROW(apply_text(c, "just words\n"), ConfigError);
  EXPECT_THROW(apply_text(c, "dataset_kind = parquet\n"), ConfigError);
  EXPECT_THROW(apply_text(c, "variant = huge\n"), ConfigError);
  EXPECT_THROW(apply_file(c, "/nonexistent/run.cfg"), ConfigError);
}

TEST(RunConfig, ValidationNamesTheViolatedConstraint) {
  const std::vector<std::pair<std::string, std::string>> cases = {
      {"input_len = 100\n", "divisible"},
      {"pred_len = 24\n", "at least 2 patches"},
      {"embed_dim = 0\n", "embed_dim"},
      {"dropout = 1.5\n", "dropout"},
      {"split_train = 0.9\n", "split"},
      {"n_seeds = 0\n", "n_seeds"},
      {"dataset_kind = csv\n", "data_path"},
  };
  for (const auto& [text, needle] : cases) {
    RunConfig c = config_from(text);
    try {
      validate(c);
      ADD_FAILURE() << "accepted " << text;
    } catch (const ConfigError& e) {
      std::string msg = e.what();
      std::transform(msg.begin(), msg.end(), msg.begin(), ::tolower);
      EXPECT_NE(msg.find(needle), std::string::npos) << text << " -> " << e.what();
    }
  }
}

TEST(Cli, ExitCodes) {
  auto dir = scratch_dir("cli_exit");
  EXPECT_EQ(run_cli({"--help"}).code, kExitOk);
  EXPECT_EQ(run_cli({}).code, kExitConfig);
  EXPECT_EQ(run_cli({"frobnicate"}).code, kExitConfig);
  EXPECT_EQ(run_cli({"train", "--set", "input_len=100"}).code, kExitConfig);
  EXPECT_EQ(run_cli({"synth", "--config", (dir / "missing.cfg").string()}).code, kExitConfig);

  auto r = run_cli({"train", "--set", "dataset_kind=csv", "--set",
                    "data_path=" + (dir / "missing.csv").string()});
  EXPECT_EQ(r.code, kExitData);
  EXPECT_NE(r.err.find("data error"), std::string::npos);

  auto cfg = write_config(dir);
  r = run_cli({"train", "-c", cfg.string(), "--set", "lr=1e300"});
  EXPECT_EQ(r.code, kExitNumerical) << r.err;
}

TEST(Cli, SynthIsByteReproducibleAndWritesTheSidecar) {
  auto dir = scratch_dir("cli_synth");
  auto cfg = write_config(dir, "synth.length = 5000\nsynth.outlier_rate = 0.02\n"
                               "synth.outlier_magnitude = 5\nsynth.seed = 4\n");
  ASSERT_EQ(run_cli({"synth", "-c", cfg.string(), "--set", "data_path=" + (dir / "a.csv").string()})
                .code,
            kExitOk);
  ASSERT_EQ(run_cli({"synth", "-c", cfg.string(), "--set", "data_path=" + (dir / "b.csv").string()})
                .code,
            kExitOk);
  EXPECT_EQ(read_file(dir / "a.csv"), read_file(dir / "b.csv"));
  EXPECT_EQ(read_file(dir / "a.outliers.csv"), read_file(dir / "b.outliers.csv"));

  Dataset ds = load_csv(dir / "a.csv");
  EXPECT_EQ(ds.length(), 5000u);

  // Sidecar agrees with an in-process run of the same spec.
  RunConfig c;
  apply_file(c, cfg);
  auto ref = synth_generate(effective_synth(c));
  EXPECT_EQ(ds.columns, ref.dataset.columns);
  std::istringstream side(read_file(dir / "a.outliers.csv"));
  std::string line;
  std::getline(side, line);
  EXPECT_EQ(line, "variable,start,length");
  std::size_t rows = 0;
  while (std::getline(side, line)) ++rows;
  EXPECT_EQ(rows, ref.outliers.size());
  // Renewal count oracle: q = rate/6 per free step, 6 steps per patch.
  const double q = 0.02 / 6.0;
  EXPECT_NEAR(static_cast<double>(rows), 5000.0 * q / (1.0 + 5.0 * q),
              4.0 * std::sqrt(5000.0 * q));
}

TEST(Cli, SynthSeedFallsBackToTheRunSeed) {
  RunConfig c = config_from("seed = 9\n");
  EXPECT_EQ(effective_synth(c).seed, 9u);
  c = config_from("seed = 9\nsynth.seed = 2\n");
  EXPECT_EQ(effective_synth(c).seed, 2u);
}

TEST(Cli, TrainWritesArtifactsReproducibly) {
  auto dir = scratch_dir("cli_train");
  auto cfg = write_config(dir);
  auto r = run_cli({"train", "-c", cfg.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.out.find("final validation loss"), std::string::npos);
  const fs::path out = dir / "out";
  for (const char* f : {"model.ckpt", "model.ckpt.manifest", "history.csv", "metrics.json"})
    EXPECT_TRUE(fs::exists(out / f)) << f;

  const std::string hist = read_file(out / "history.csv");
  EXPECT_EQ(hist.substr(0, hist.find('\n')), "epoch,lr,train_loss,val_loss");
  auto metrics = json::parse(read_file(out / "metrics.json"));
  for (const char* k : {"mse", "mae", "smape", "mase", "owa"}) EXPECT_TRUE(metrics[k].is_number());
  EXPECT_EQ(metrics["variant"], "full");
  EXPECT_EQ(metrics["config"]["epochs"], 2);

  const std::string ckpt = read_file(out / "model.ckpt");
  ASSERT_EQ(run_cli({"train", "-c", cfg.string()}).code, kExitOk);
  EXPECT_EQ(read_file(out / "history.csv"), hist);
  EXPECT_EQ(read_file(out / "model.ckpt"), ckpt);
  EXPECT_EQ(json::parse(read_file(out / "metrics.json")), metrics);

  // Same result as the library called directly.
  RunConfig c;
  apply_file(c, cfg);
  Dataset ds = load_dataset(c);
  auto exp = run_experiment(ds, c.model, c.train, c.split, c.periodicity_m);
  EXPECT_EQ(metrics["mse"].get<double>(), exp.metrics.mse);
}

TEST(Cli, ZeroEpochsCheckpointsTheInitialization) {
  auto dir = scratch_dir("cli_train0");
  auto cfg = write_config(dir, "epochs = 0\nseed = 3\n");
  auto r = run_cli({"train", "-c", cfg.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  RunConfig c;
  apply_file(c, cfg);
  Model init(c.model, 3);
  EXPECT_EQ(load_checkpoint(dir / "out" / "model.ckpt").snapshot(), init.snapshot());
  EXPECT_EQ(read_file(dir / "out" / "history.csv"), "epoch,lr,train_loss,val_loss\n");
}

TEST(Cli, EvalMatchesInProcessEvaluate) {
  auto dir = scratch_dir("cli_eval");
  auto cfg = write_config(dir);
  ASSERT_EQ(run_cli({"train", "-c", cfg.string()}).code, kExitOk);
  const fs::path ckpt = dir / "out" / "model.ckpt";
  auto r = run_cli({"eval", "-c", cfg.string(), "--checkpoint", ckpt.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  auto j = json::parse(r.out);
  EXPECT_EQ(j, json::parse(read_file(dir / "out" / "eval_metrics.json")));

  RunConfig c;
  apply_file(c, cfg);
  Model model = load_checkpoint(ckpt);
  auto te = sliding_windows(load_dataset(c), 24, 24, c.split, Split::Test);
  auto ref = evaluate(model, te, 12);
  EXPECT_EQ(j["mse"].get<double>(), ref.mse);
  EXPECT_EQ(j["mae"].get<double>(), ref.mae);
  EXPECT_EQ(j["smape"].get<double>(), ref.smape);
  EXPECT_EQ(j["mase"].get<double>(), ref.mase);
  EXPECT_EQ(j["owa"].get<double>(), ref.owa);
  EXPECT_EQ(j["n_windows"].get<std::size_t>(), te.size());
  // Agrees with what train reported for the same checkpoint.
  auto tm = json::parse(read_file(dir / "out" / "metrics.json"));
  EXPECT_EQ(tm["mse"], j["mse"]);
}

TEST(Cli, ZeroModelOnConstantDataHasZeroError) {
  auto dir = scratch_dir("cli_const");
  Dataset ds;
  ds.names = {"c"};
  ds.columns = {std::vector<double>(600, 2.5)};
  write_csv(ds, dir / "const.csv");
  RunConfig c = config_from(small_config(dir / "out"));
  Model model(c.model, 0);
  for (const auto& p : model.parameters()) set_all(p.tensor, 0.0);
  save_checkpoint(model, dir / "zero.ckpt");
  auto r = run_cli({"eval", "-c", write_config(dir).string(), "--set", "dataset_kind=csv", "--set",
                    "data_path=" + (dir / "const.csv").string(), "--checkpoint",
                    (dir / "zero.ckpt").string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  auto j = json::parse(r.out);
  EXPECT_EQ(j["mse"].get<double>(), 0.0);
  EXPECT_EQ(j["mae"].get<double>(), 0.0);
  EXPECT_TRUE(j["mase"].is_null());
}

TEST(Cli, PredictMatchesInProcessForward) {
  auto dir = scratch_dir("cli_predict");
  auto cfg = write_config(dir, "synth.n_vars = 2\n");
  ASSERT_EQ(run_cli({"train", "-c", cfg.string(), "--set", "epochs=1"}).code, kExitOk);
  RunConfig c;
  apply_file(c, cfg);
  auto window = write_window(c, dir);
  auto r = run_cli({"predict", "-c", cfg.string(), "--checkpoint", (dir / "out/model.ckpt").string(),
                    "--window", window.string(), "-o", (dir / "pred.csv").string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  Dataset pred = load_csv(dir / "pred.csv");
  ASSERT_EQ(pred.length(), 24u);
  ASSERT_EQ(pred.n_vars(), 2u);

  Model model = load_checkpoint(dir / "out/model.ckpt");
  auto te = sliding_windows(load_dataset(c), 24, 24, c.split, Split::Test);
  double scale = 0.0;
  for (std::size_t v = 0; v < 2; ++v) {
    EXPECT_EQ(pred.columns[v], predict(model, te[v]));
    for (double x : te[v].input) scale = std::max(scale, std::fabs(x));
  }
  // Output lives on the raw scale, not the normalized one.
  for (double y : pred.columns[0]) EXPECT_LT(std::fabs(y), 10.0 * scale);

  write_file(dir / "short.csv", "a\n1\n2\n");
  r = run_cli({"predict", "-c", cfg.string(), "--checkpoint", (dir / "out/model.ckpt").string(),
               "--window", (dir / "short.csv").string()});
  EXPECT_EQ(r.code, kExitData);
  EXPECT_NE(r.err.find("input_len = 24"), std::string::npos) << r.err;
}

TEST(Cli, ExportAttentionWritesTwelveStochasticMatrices) {
  auto dir = scratch_dir("cli_attention");
  auto cfg = write_config(dir, "input_len = 96\npred_len = 96\nstages = 3\nepochs = 0\n"
                               "synth.length = 2000\n");
  ASSERT_EQ(run_cli({"train", "-c", cfg.string()}).code, kExitOk);
  RunConfig c;
  apply_file(c, cfg);
  auto window = write_window(c, dir);
  auto r = run_cli({"export-attention", "-c", cfg.string(), "--checkpoint",
                    (dir / "out/model.ckpt").string(), "--window", window.string(), "-o",
                    (dir / "attn").string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  std::map<std::string, int> per_site;
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(dir / "attn")) {
    ++files;
    const std::string stem = e.path().stem().string();
    const std::string site = stem.substr(stem.find('_') + 1);
    ++per_site[site];
    auto m = read_matrix(e.path());
    ASSERT_FALSE(m.empty());
    const std::size_t cols = m[0].size();
    for (std::size_t i = 0; i < m.size(); ++i) {
      ASSERT_EQ(m[i].size(), cols);
      double s = 0.0;
      for (double w : m[i]) s += w;
      EXPECT_NEAR(s, 1.0, 1e-9) << stem << " row " << i;
      if (site.starts_with("enc") && cols > 1) {
        EXPECT_LE(m[i][i % cols], 1e-300) << stem;
      }
    }
  }
  EXPECT_EQ(files, 12u);
  EXPECT_EQ(per_site, (std::map<std::string, int>{
                          {"enc_elem", 3}, {"enc_patch", 3}, {"dec_cross", 3}, {"dec_elem", 3}}));
}

TEST(Cli, AblateSummaryMeansEqualRowMeans) {
  auto dir = scratch_dir("cli_ablate");
  auto cfg = write_config(dir, "epochs = 1\nn_seeds = 2\n");
  auto r = run_cli({"ablate", "-c", cfg.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  auto arr = json::parse(read_file(dir / "out/ablation.json"));
  ASSERT_EQ(arr.size(), 6u);
  std::istringstream csv(read_file(dir / "out/ablation_summary.csv"));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "variant,n_seeds,seeds,mse,mae,smape,mase,owa,n_windows");
  std::size_t i = 0;
  for (; std::getline(csv, line); ++i) {
    ASSERT_LT(i, arr.size());
    const auto& row = arr[i];
    EXPECT_EQ(line.substr(0, line.find(',')), row["variant"].get<std::string>());
    EXPECT_NE(line.find(",2,0;1,"), std::string::npos) << line;
    ASSERT_EQ(row["per_seed"].size(), 2u);
    for (const char* k : {"mse", "mae", "smape", "mase", "owa"}) {
      const double mean =
          (row["per_seed"][0][k].get<double>() + row["per_seed"][1][k].get<double>()) / 2.0;
      EXPECT_NEAR(row[k].get<double>(), mean, 1e-15 * std::max(1.0, std::fabs(mean))) << k;
    }
  }
  EXPECT_EQ(i, 6u);

  r = run_cli({"ablate", "-c", cfg.string(), "--variants", "full,no_dm", "--set", "n_seeds=1"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(json::parse(read_file(dir / "out/ablation.json")).size(), 2u);
  EXPECT_EQ(run_cli({"ablate", "-c", cfg.string(), "--variants", "nope"}).code, kExitConfig);
}

TEST(Cli, GradcheckPassesAndCatchesCorruption) {
  auto r = run_cli({"gradcheck"});
  ASSERT_EQ(r.code, kExitOk) << r.out << r.err;
  EXPECT_NE(r.out.find("PASS"), std::string::npos);
  Model mini(gradcheck_mini_config(), 0);
  for (const auto& p : mini.parameters()) EXPECT_NE(r.out.find(p.name + " "), std::string::npos);

  r = run_cli({"gradcheck", "--corrupt-gradient", "head.decoder.bias"});
  EXPECT_EQ(r.code, kExitNumerical);
  EXPECT_NE(r.out.find("FAIL"), std::string::npos);
  EXPECT_NE(r.out.find("at head.decoder.bias"), std::string::npos) << r.out;
  EXPECT_EQ(run_cli({"gradcheck", "--corrupt-gradient", "nothing"}).code, kExitConfig);
}

TEST(Cli, FormatDoubleRoundTrips) {
  Rng rng(3);
  for (double v : random_values(200, rng, 1e6)) EXPECT_EQ(std::stod(format_double(v)), v);
  EXPECT_EQ(format_double(std::nan("")), "nan");
  EXPECT_EQ(format_double(0.1), "0.10000000000000001");
}
