// Command-line front end: gen, preprocess, train, eval, sweep, explain.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "cgat/checkpoint.hpp"
#include "cgat/dataset.hpp"
#include "cgat/error.hpp"
#include "cgat/explain.hpp"
#include "cgat/hash.hpp"
#include "cgat/parallel.hpp"
#include "cgat/sweep.hpp"
#include "cgat/synth.hpp"
#include "cgat/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace cgat;

namespace {

struct Common {
  std::uint64_t seed = 0;
  std::string out;
};

// Collects what every output directory records about the run that made it.
class RunManifest {
 public:
  RunManifest(std::string command, const Common& common)
      : command_(std::move(command)), seed_(common.seed), start_(std::chrono::steady_clock::now()) {}

  void config(json c) { config_ = std::move(c); }
  void input(const fs::path& path) { inputs_[path.string()] = sha256_file(path); }
  void output(const fs::path& path) { outputs_.push_back(path.string()); }

  void write(const fs::path& dir) const {
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    const std::time_t now = std::time(nullptr);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    const json manifest = {{"command", command_},
                           {"config", config_},
                           {"seed", seed_},
                           {"inputs", inputs_},
                           {"outputs", outputs_},
                           {"threads", thread_count()},
                           {"finished_at", stamp},
                           {"wall_clock_seconds", seconds}};
    write_file(dir / "manifest.json", manifest.dump(2) + "\n");
  }

 private:
  std::string command_;
  std::uint64_t seed_;
  std::chrono::steady_clock::time_point start_;
  json config_ = json::object();
  json inputs_ = json::object();
  std::vector<std::string> outputs_;
};

void add_common(CLI::App* cmd, Common& common, bool out_required = true) {
  cmd->add_option("--seed", common.seed, "Root random seed")->capture_default_str();
  auto* out = cmd->add_option("--out", common.out, "Output directory");
  if (out_required) out->required();
}

// ---- gen -------------------------------------------------------------------

struct GenOptions {
  std::string profile = "balanced";
  int per_class = 100;
  int total = 528;
};

int run_gen(const GenOptions& o, const Common& common) {
  const auto profile = parse_synth_profile(o.profile);
  const auto counts = profile_counts(profile, profile == SynthProfile::balanced ? o.per_class : o.total);
  RunManifest manifest("gen", common);
  manifest.config({{"profile", o.profile}, {"per_class", o.per_class}, {"total", o.total}, {"counts", counts}});
  const fs::path out = common.out;
  spdlog::info("generating {} meshes ({} profile)", std::accumulate(counts.begin(), counts.end(), 0), o.profile);
  const auto records = generate_dataset(out, counts, common.seed);
  for (const auto& r : records) manifest.output(r.path);
  manifest.output("manifest.tsv");
  manifest.write(out);
  spdlog::info("wrote {} meshes and manifest.tsv to {}", records.size(), out.string());
  return 0;
}

// ---- preprocess ------------------------------------------------------------

struct PreprocessOptions {
  std::string manifest;
  std::size_t target_vertices = 750;
  std::string fit_scaler_on = "train";
};

int run_preprocess(const PreprocessOptions& o, const Common& common) {
  const fs::path manifest_path = o.manifest;
  const auto records = read_manifest(manifest_path);
  if (records.empty()) fail(ErrorCode::malformed_file, "manifest lists no samples");
  PreprocessConfig config;
  config.target_vertices = o.target_vertices;
  config.fit_scaler_on_all = o.fit_scaler_on == "all";
  config.split_seed = common.seed;
  RunManifest manifest("preprocess", common);
  manifest.config({{"manifest", o.manifest},
                   {"target_vertices", o.target_vertices},
                   {"fit_scaler_on", o.fit_scaler_on}});
  manifest.input(manifest_path);
  spdlog::info("preprocessing {} meshes to {} vertices", records.size(), o.target_vertices);
  const auto dataset = preprocess_dataset(records, manifest_path.parent_path(), config);

  const fs::path out = common.out;
  save_graph_cache(out / "graphs.bin", dataset);
  std::vector<ManifestRecord> split_manifest;
  std::array<int, 3> per_split{};
  for (const auto& r : dataset.records) {
    split_manifest.push_back({r.id, r.label, r.split});
    if (r.split != Split::none) ++per_split[static_cast<int>(r.split)];
  }
  write_manifest(out / "manifest.tsv", split_manifest);
  manifest.output("graphs.bin");
  manifest.output("manifest.tsv");
  manifest.write(out);
  spdlog::info("splits: {} train, {} val, {} test; scaler curvature [{:.4g}, {:.4g}], distance [{:.4g}, {:.4g}]",
               per_split[0], per_split[1], per_split[2], dataset.scaler.minimum[0], dataset.scaler.maximum[0],
               dataset.scaler.minimum[1], dataset.scaler.maximum[1]);
  return 0;
}

// ---- train -----------------------------------------------------------------

struct ModelOptions {
  std::string architecture = "cgat";
  std::string features = "both";
  int blocks = 6;
  std::string cls = "directed";
  int heads = 8;
  int hidden = 128;
  std::string attention = "dynamic";
  std::string head_merge = "max";
  double dropout = 0.3;

  ModelConfig resolve() const {
    ModelConfig c;
    c.architecture = parse_architecture(architecture);
    c.features = parse_feature_channels(features);
    c.blocks = blocks;
    c.cls_mode = parse_cls_mode(cls);
    c.heads = heads;
    c.hidden = hidden;
    c.attention = parse_attention_kind(attention);
    c.head_merge = parse_head_merge(head_merge);
    c.dropout = dropout;
    validate(c);
    return c;
  }
};

struct TrainOptions {
  int epochs = 150;
  std::size_t batch_size = 32;
  double lr = 0.001;

  TrainConfig resolve(std::uint64_t seed) const {
    TrainConfig c;
    c.epochs = epochs;
    c.batch_size = batch_size;
    c.lr = lr;
    c.seed = seed;
    validate(c);
    return c;
  }
};

void add_model_options(CLI::App* cmd, ModelOptions& m) {
  cmd->add_option("--architecture", m.architecture, "Model family")
      ->check(CLI::IsMember({"cgat", "gcn_mean", "gat_mean"}))
      ->capture_default_str();
  cmd->add_option("--features", m.features, "Node features")
      ->check(CLI::IsMember({"curv", "dist", "both"}))
      ->capture_default_str();
  cmd->add_option("--blocks", m.blocks, "Number of blocks L")->check(CLI::Range(1, 15))->capture_default_str();
  cmd->add_option("--cls", m.cls, "CLS edge direction")
      ->check(CLI::IsMember({"directed", "undirected"}))
      ->capture_default_str();
  cmd->add_option("--heads", m.heads, "Attention heads K")->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--hidden", m.hidden, "Hidden width F")->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--attention", m.attention, "Attention scoring")
      ->check(CLI::IsMember({"static", "dynamic"}))
      ->capture_default_str();
  cmd->add_option("--head-merge", m.head_merge, "Head merge inside each block")
      ->check(CLI::IsMember({"max", "mean", "concat"}))
      ->capture_default_str();
  cmd->add_option("--dropout", m.dropout, "Dropout before the head")->check(CLI::Range(0.0, 0.99))->capture_default_str();
}

void add_train_options(CLI::App* cmd, TrainOptions& t) {
  cmd->add_option("--epochs", t.epochs, "Training epochs")->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--batch-size", t.batch_size, "Minibatch size")->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--lr", t.lr, "Initial learning rate")->check(CLI::PositiveNumber)->capture_default_str();
}

json preprocessing_metadata(const GraphDataset& data) {
  return {{"target_vertices", data.config.target_vertices},
          {"scaler_min", data.scaler.minimum},
          {"scaler_max", data.scaler.maximum}};
}

json metrics_json(const Metrics& m) {
  return {{"weighted_precision", m.weighted_precision},
          {"weighted_recall", m.weighted_recall},
          {"weighted_f1", m.weighted_f1},
          {"mae", m.mae},
          {"accuracy", m.accuracy},
          {"per_class_f1", m.per_class_f1},
          {"confusion", m.confusion},
          {"count", m.count}};
}

int run_train(const std::string& data_path, const ModelOptions& mo, const TrainOptions& to, const Common& common) {
  const ModelConfig mc = mo.resolve();
  const TrainConfig tc = to.resolve(common.seed);
  const auto data = load_graph_cache(data_path);
  const auto train_set = make_samples(data, mc, Split::train);
  const auto val_set = make_samples(data, mc, Split::val);
  const auto test_set = make_samples(data, mc, Split::test);
  RunManifest manifest("train", common);
  manifest.config({{"data", data_path},
                   {"model", to_json(mc)},
                   {"epochs", tc.epochs},
                   {"batch_size", tc.batch_size},
                   {"lr", tc.lr},
                   {"patience", tc.patience},
                   {"factor", tc.factor}});
  manifest.input(data_path);
  const std::string name = model_name(mc);
  spdlog::info("training {} ({} train / {} val / {} test samples, {} epochs)", name, train_set.size(),
               val_set.size(), test_set.size(), tc.epochs);

  Model model = init_model(mc, common.seed);
  spdlog::info("{} parameters", model.params.scalar_count());
  const auto result = train(std::move(model), train_set, val_set, tc, [](const EpochRecord& r) {
    spdlog::info("epoch {:3d}  train loss {:.4f}  val loss {:.4f}  val F1 {:.4f}  lr {:.3g}", r.epoch, r.train_loss,
                 r.val_loss, r.val_f1, r.lr);
  });

  const fs::path out = common.out;
  json meta = preprocessing_metadata(data);
  meta["model_name"] = name;
  meta["seed"] = common.seed;
  meta["best_epoch"] = result.best_epoch;
  save_checkpoint(out / "model.ckpt", result.best_model, meta);
  save_checkpoint(out / "final.ckpt", result.final_model, meta);
  write_file(out / "history.tsv", history_tsv(result.history));
  json summary = {{"model", name}, {"best_epoch", result.best_epoch}, {"best_val_f1", result.best_val_f1}};
  if (!test_set.empty()) {
    const auto ev = evaluate(result.best_model, test_set);
    summary["test"] = metrics_json(ev.metrics);
    spdlog::info("test weighted F1 {:.4f}, MAE {:.4f}", ev.metrics.weighted_f1, ev.metrics.mae);
  }
  write_file(out / "metrics.json", summary.dump(2) + "\n");
  for (const char* f : {"model.ckpt", "final.ckpt", "history.tsv", "metrics.json"}) manifest.output(f);
  manifest.write(out);
  return 0;
}

// ---- eval ------------------------------------------------------------------

int run_eval(const std::string& model_path, const std::string& data_path, const std::string& split_name,
             const Common& common) {
  const auto ckpt = load_checkpoint(model_path);
  const auto data = load_graph_cache(data_path);
  const Split split = parse_split(split_name);
  const auto samples = make_samples(data, ckpt.model.config, split);
  if (samples.empty()) fail(ErrorCode::empty_eval_set, "no samples in split '" + split_name + "'");
  RunManifest manifest("eval", common);
  manifest.config({{"model", model_path}, {"data", data_path}, {"split", split_name}});
  manifest.input(model_path);
  manifest.input(data_path);
  const auto ev = evaluate(ckpt.model, samples);
  std::string predictions = "id\tlabel\tprediction\n";
  for (std::size_t i = 0; i < samples.size(); ++i) {
    predictions += samples[i].id + "\t" + std::to_string(samples[i].label) + "\t" +
                   std::to_string(ev.predictions[i]) + "\n";
  }
  const fs::path out = common.out;
  json summary = metrics_json(ev.metrics);
  summary["model"] = model_name(ckpt.model.config);
  summary["loss"] = ev.loss;
  write_file(out / "metrics.json", summary.dump(2) + "\n");
  write_file(out / "predictions.tsv", predictions);
  manifest.output("metrics.json");
  manifest.output("predictions.tsv");
  manifest.write(out);
  spdlog::info("{} on {} ({} samples): weighted F1 {:.4f}, MAE {:.4f}", model_name(ckpt.model.config), split_name,
               samples.size(), ev.metrics.weighted_f1, ev.metrics.mae);
  return 0;
}

// ---- sweep -----------------------------------------------------------------

struct SweepOptions {
  std::vector<int> blocks = {1, 2, 3, 4, 5, 6};
  std::vector<std::string> cls = {"undirected", "directed"};
  std::vector<std::string> features = {"curv", "dist", "both"};
  int repeats = 10;
};

int run_sweep(const std::string& data_path, const SweepOptions& so, const ModelOptions& mo, const TrainOptions& to,
              const Common& common) {
  SweepConfig sc;
  sc.base = mo.resolve();
  sc.train = to.resolve(common.seed);
  sc.blocks = so.blocks;
  sc.modes.clear();
  for (const auto& m : so.cls) sc.modes.push_back(parse_cls_mode(m));
  sc.features.clear();
  for (const auto& f : so.features) sc.features.push_back(parse_feature_channels(f));
  sc.repeats = so.repeats;
  sc.seed = common.seed;
  const auto data = load_graph_cache(data_path);
  RunManifest manifest("sweep", common);
  manifest.config({{"data", data_path},
                   {"model", to_json(sc.base)},
                   {"blocks", so.blocks},
                   {"cls", so.cls},
                   {"features", so.features},
                   {"repeats", so.repeats},
                   {"epochs", sc.train.epochs},
                   {"batch_size", sc.train.batch_size},
                   {"lr", sc.train.lr}});
  manifest.input(data_path);
  spdlog::info("sweep over {} runs", sc.blocks.size() * sc.modes.size() * sc.features.size() * sc.repeats);
  const auto result = depth_sweep(data, sc, [](const SweepRun& r) {
    spdlog::info("{} repeat {}: test F1 {:.4f}, MAE {:.4f}", r.name, r.repeat, r.test_f1, r.test_mae);
  });
  const fs::path out = common.out;
  write_file(out / "runs.tsv", sweep_runs_tsv(result));
  write_file(out / "grid.tsv", sweep_grid_tsv(result));
  manifest.output("runs.tsv");
  manifest.output("grid.tsv");
  manifest.write(out);
  std::cout << sweep_grid_tsv(result);
  return 0;
}

// ---- explain ---------------------------------------------------------------

struct ExplainCliOptions {
  std::string model;
  std::vector<std::string> meshes;
  std::string out;
  std::string renormalize = "true";
  std::string head_merge = "mean";
};

int run_explain(const ExplainCliOptions& o, const Common& common) {
  const auto ckpt = load_checkpoint(o.model);
  const auto& config = ckpt.model.config;
  if (!config.uses_cls()) fail(ErrorCode::invalid_config, "explanations need a CGAT checkpoint");
  if (!ckpt.metadata.contains("scaler_min") || !ckpt.metadata.contains("target_vertices")) {
    fail(ErrorCode::malformed_file, "checkpoint lacks preprocessing metadata");
  }
  FeatureScaler scaler;
  scaler.channels = FeatureChannels::both;
  scaler.minimum = ckpt.metadata.at("scaler_min").get<std::vector<double>>();
  scaler.maximum = ckpt.metadata.at("scaler_max").get<std::vector<double>>();
  const auto target = ckpt.metadata.at("target_vertices").get<std::size_t>();

  ExplainOptions options;
  options.renormalize = o.renormalize == "true";
  options.head_merge = parse_rollout_head_merge(o.head_merge);

  std::vector<GraphRecord> records;
  std::vector<std::vector<double>> scores;
  for (const auto& path : o.meshes) {
    GraphRecord r = preprocess_mesh(load_mesh(path), target);
    r.id = path;
    const Sample s = make_sample(r, scaler, config);
    scores.push_back(explain_batch(ckpt.model, s.graph, options).front());
    records.push_back(std::move(r));
  }
  const auto clipped = clip_for_display(scores);

  // A single mesh writes exactly --out; several meshes write <stem>.ply into the --out directory.
  const fs::path out = o.out;
  const bool single = o.meshes.size() == 1 && out.extension() == ".ply";
  const fs::path dir = single ? (out.has_parent_path() ? out.parent_path() : fs::path(".")) : out;
  RunManifest manifest("explain", common);
  manifest.config({{"model", o.model},
                   {"meshes", o.meshes},
                   {"renormalize", options.renormalize},
                   {"rollout_head_merge", o.head_merge}});
  manifest.input(o.model);
  for (const auto& m : o.meshes) manifest.input(m);
  json sidecar = explanation_sidecar(clipped, options, sha256_file(o.model));
  sidecar["files"] = json::array();
  for (std::size_t i = 0; i < records.size(); ++i) {
    const fs::path file = single ? out : dir / (fs::path(o.meshes[i]).stem().string() + ".ply");
    write_ply_scalar(records[i].mesh, clipped.scores[i], file);
    manifest.output(file.filename());
    sidecar["files"].push_back({{"mesh", o.meshes[i]}, {"ply", file.filename().string()},
                                {"vertices", records[i].mesh.num_vertices()}});
  }
  write_file(dir / "explanation.json", sidecar.dump(2) + "\n");
  manifest.output("explanation.json");
  manifest.write(dir);
  spdlog::info("wrote {} explanation(s); display range [{:.4g}, {:.4g}]", records.size(), clipped.lo, clipped.hi);
  return 0;
}

int exit_code_for(const Error& e) {
  switch (e.code()) {
    case ErrorCode::invalid_config:
    case ErrorCode::invalid_argument: return 1;
    default: return 2;
  }
}

}  // namespace

int main(int argc, char** argv) {
  retain_heap();
  auto logger = spdlog::stderr_color_st("cgat");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%H:%M:%S] %v");

  CLI::App app{"Class-node graph attention networks for mesh classification"};
  app.set_config("--config", "", "TOML/INI file with option defaults (flags take precedence)");
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for all subcommands");

  Common common;

  GenOptions gen;
  auto* gen_cmd = app.add_subcommand("gen", "Generate a synthetic staged-tooth dataset");
  add_common(gen_cmd, common);
  gen_cmd->add_option("--profile", gen.profile, "Class balance profile")
      ->check(CLI::IsMember({"balanced", "paper"}))
      ->capture_default_str();
  gen_cmd->add_option("--per-class", gen.per_class, "Samples per stage (balanced)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  gen_cmd->add_option("--total", gen.total, "Total samples (paper profile)")
      ->check(CLI::Range(5, 1000000))
      ->capture_default_str();

  PreprocessOptions pre;
  auto* pre_cmd = app.add_subcommand("preprocess", "Decimate, normalize, compute features and cache graphs");
  add_common(pre_cmd, common);
  pre_cmd->add_option("--manifest", pre.manifest, "Dataset manifest (path, label, split)")->required();
  pre_cmd->add_option("--target-vertices", pre.target_vertices, "Decimation target")
      ->check(CLI::Range(4, 1000000))
      ->capture_default_str();
  pre_cmd->add_option("--fit-scaler-on", pre.fit_scaler_on, "Samples used to fit the feature scaler")
      ->check(CLI::IsMember({"train", "all"}))
      ->capture_default_str();

  std::string data_path;
  ModelOptions model_opts;
  TrainOptions train_opts;
  auto* train_cmd = app.add_subcommand("train", "Train a model on a graph cache");
  add_common(train_cmd, common);
  train_cmd->add_option("--data", data_path, "Graph cache from preprocess")->required();
  add_model_options(train_cmd, model_opts);
  add_train_options(train_cmd, train_opts);

  std::string eval_model, eval_split = "test";
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
  add_common(eval_cmd, common);
  eval_cmd->add_option("--model", eval_model, "Checkpoint")->required();
  eval_cmd->add_option("--data", data_path, "Graph cache from preprocess")->required();
  eval_cmd->add_option("--split", eval_split, "Split to score")
      ->check(CLI::IsMember({"train", "val", "test"}))
      ->capture_default_str();

  SweepOptions sweep;
  auto* sweep_cmd = app.add_subcommand("sweep", "Depth / CLS-direction / feature sweep");
  add_common(sweep_cmd, common);
  sweep_cmd->add_option("--data", data_path, "Graph cache from preprocess")->required();
  sweep_cmd->add_option("--depths", sweep.blocks, "Block counts to train")
      ->delimiter(',')
      ->check(CLI::Range(1, 15))
      ->capture_default_str();
  sweep_cmd->add_option("--cls-modes", sweep.cls, "CLS edge directions")
      ->delimiter(',')
      ->check(CLI::IsMember({"directed", "undirected"}))
      ->capture_default_str();
  sweep_cmd->add_option("--feature-sets", sweep.features, "Feature selections")
      ->delimiter(',')
      ->check(CLI::IsMember({"curv", "dist", "both"}))
      ->capture_default_str();
  sweep_cmd->add_option("--repeats", sweep.repeats, "Seeded repeats per cell")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  add_model_options(sweep_cmd, model_opts);
  add_train_options(sweep_cmd, train_opts);

  ExplainCliOptions explain;
  auto* explain_cmd = app.add_subcommand("explain", "Attention-rollout explanation exported as colored PLY");
  explain_cmd->add_option("--seed", common.seed, "Root random seed")->capture_default_str();
  explain_cmd->add_option("--model", explain.model, "CGAT checkpoint")->required();
  explain_cmd->add_option("--mesh", explain.meshes, "Input mesh (repeatable; clipping is shared)")->required();
  explain_cmd->add_option("--out", explain.out, "Output .ply (single mesh) or directory")->required();
  explain_cmd->add_option("--renormalize", explain.renormalize, "Row-normalize each rollout factor")
      ->check(CLI::IsMember({"true", "false"}))
      ->capture_default_str();
  explain_cmd->add_option("--rollout-head-merge", explain.head_merge, "Head merge for attention matrices")
      ->check(CLI::IsMember({"mean", "max"}))
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*gen_cmd) return run_gen(gen, common);
    if (*pre_cmd) return run_preprocess(pre, common);
    if (*train_cmd) return run_train(data_path, model_opts, train_opts, common);
    if (*eval_cmd) return run_eval(eval_model, data_path, eval_split, common);
    if (*sweep_cmd) return run_sweep(data_path, sweep, model_opts, train_opts, common);
    if (*explain_cmd) return run_explain(explain, common);
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return exit_code_for(e);
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 2;
  }
  return 1;
}
