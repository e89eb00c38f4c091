// Command-line front end: synthetic corpus generation, training runs,
// evaluation, parameter sweeps, run reproduction, and graph export.

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ariign/corpus.hpp"
#include "ariign/errors.hpp"
#include "ariign/kernels.hpp"
#include "ariign/metrics.hpp"
#include "ariign/model.hpp"
#include "ariign/relgraph.hpp"
#include "ariign/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ariign;

namespace {

std::string utc_now() {
  std::time_t t = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

std::string file_fingerprint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for hashing: " + path);
  std::uint64_t h = 1469598103934665603ull;  // FNV-1a 64
  char chunk[4096];
  while (in.read(chunk, sizeof chunk) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i)
      h = (h ^ static_cast<unsigned char>(chunk[i])) * 1099511628211ull;
    if (!in) break;
  }
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

std::array<bool, 3> parse_modalities(const std::string& s) {
  std::array<bool, 3> out = {false, false, false};
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok == "t" || tok == "text") out[0] = true;
    else if (tok == "a" || tok == "audio") out[1] = true;
    else if (tok == "v" || tok == "visual") out[2] = true;
    else throw ConfigError("unknown modality token: " + tok);
  }
  if (!out[0] && !out[1] && !out[2])
    throw ConfigError("--modalities selects nothing");
  return out;
}

FusionMode parse_fusion(const std::string& s) {
  if (s == "cross_modal") return FusionMode::CrossModal;
  if (s == "add") return FusionMode::Add;
  if (s == "concat") return FusionMode::Concat;
  throw ConfigError("unknown fusion mode: " + s);
}

std::uint64_t env_seed_or(std::uint64_t fallback) {
  const char* env = std::getenv("ARIIGN_SEED");
  if (!env) return fallback;
  try {
    return std::stoull(env);
  } catch (const std::exception&) {
    throw ConfigError("ARIIGN_SEED is not an unsigned integer");
  }
}

// Shared flag block for commands that resolve a TrainConfig.
struct TrainFlags {
  std::string config_path;
  std::string modalities;
  std::string fusion;
  std::vector<std::string> ablate;
  TrainConfig cfg;
  double train_ratio = 0.8, val_ratio = 0.1, test_ratio = 0.1;
  std::uint64_t split_seed = 0;
  bool split_seed_set = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON file mirroring the training config");
    cmd->add_option("--epochs", cfg.epochs);
    cmd->add_option("--gan-epochs", cfg.gan_epochs);
    cmd->add_option("--batch", cfg.batch_size);
    cmd->add_option("--lr", cfg.lr);
    cmd->add_option("--dropout", cfg.dropout);
    cmd->add_option("--weight-decay", cfg.weight_decay);
    cmd->add_option("--window", cfg.window);
    cmd->add_option("--hidden", cfg.d, "projection width d");
    cmd->add_option("--beta", cfg.beta);
    cmd->add_option("--lambda", cfg.lambda);
    cmd->add_option("--seed", cfg.seed);
    cmd->add_option("--gcn-layers", cfg.gcn_layers);
    cmd->add_option("--contrast-samples", cfg.contrast_samples);
    cmd->add_flag("--single-relation", cfg.single_relation,
                  "collapse all edge relations onto one type");
    cmd->add_option("--modalities", modalities, "subset like t,a,v");
    cmd->add_option("--fusion", fusion, "cross_modal|add|concat");
    cmd->add_option("--ablate", ablate, "tgan|imcl|iccl, repeatable")
        ->allow_extra_args(false);
    cmd->add_option("--train-ratio", train_ratio);
    cmd->add_option("--val-ratio", val_ratio);
    cmd->add_option("--test-ratio", test_ratio);
    cmd->add_option("--split-seed", split_seed)
        ->each([this](const std::string&) { split_seed_set = true; });
  }

  // File config first, then any flag the user actually passed on top.
  TrainConfig resolve(const CLI::App* cmd) const {
    TrainConfig out;
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw IoError("cannot open config file: " + config_path);
      std::stringstream buf;
      buf << in.rdbuf();
      out = config_from_json(buf.str());
    }
    auto take = [&](const char* flag, auto member) {
      if (cmd->count(flag) > 0) out.*member = cfg.*member;
    };
    take("--epochs", &TrainConfig::epochs);
    take("--gan-epochs", &TrainConfig::gan_epochs);
    take("--batch", &TrainConfig::batch_size);
    take("--lr", &TrainConfig::lr);
    take("--dropout", &TrainConfig::dropout);
    take("--weight-decay", &TrainConfig::weight_decay);
    take("--window", &TrainConfig::window);
    take("--hidden", &TrainConfig::d);
    take("--beta", &TrainConfig::beta);
    take("--lambda", &TrainConfig::lambda);
    take("--seed", &TrainConfig::seed);
    take("--gcn-layers", &TrainConfig::gcn_layers);
    take("--contrast-samples", &TrainConfig::contrast_samples);
    if (cmd->count("--single-relation") > 0) out.single_relation = true;
    if (!modalities.empty()) out.modalities = parse_modalities(modalities);
    if (!fusion.empty()) out.fusion = parse_fusion(fusion);
    for (const std::string& a : ablate) {
      if (a == "tgan") out.use_tgan = false;
      else if (a == "imcl") out.use_imcl = false;
      else if (a == "iccl") out.use_iccl = false;
      else throw ConfigError("unknown ablation target: " + a);
    }
    if (cmd->count("--seed") == 0 && config_path.empty())
      out.seed = env_seed_or(out.seed);
    out.validate();
    return out;
  }

  SplitRatios ratios() const { return {train_ratio, val_ratio, test_ratio}; }
  std::uint64_t effective_split_seed(const TrainConfig& cfg_resolved) const {
    return split_seed_set ? split_seed : cfg_resolved.seed;
  }
};

struct RunResult {
  MetricsReport test;
  double seconds = 0.0;
  fs::path dir;
};

RunResult do_train_run(const TrainConfig& cfg, const std::string& corpus_path,
                       const fs::path& out_dir, const SplitRatios& ratios,
                       std::uint64_t split_seed, bool echo) {
  auto t0 = std::chrono::steady_clock::now();
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create run directory: " + out_dir.string());

  Corpus corpus = load_corpus(corpus_path);
  CorpusSplits splits = split_corpus(corpus, ratios, split_seed);

  json manifest = {
      {"schema", "ariign-manifest-v1"},
      {"created_utc", utc_now()},
      {"config", json::parse(config_to_json(cfg))},
      {"corpus",
       {{"path", fs::absolute(corpus_path).string()},
        {"fingerprint", file_fingerprint(corpus_path)},
        {"dialogues", corpus.dialogues.size()},
        {"utterances", corpus.total_utterances()}}},
      {"split",
       {{"train", ratios.train},
        {"val", ratios.val},
        {"test", ratios.test},
        {"seed", split_seed}}},
      {"outputs",
       {{"checkpoint", "checkpoint.ckpt"},
        {"log", "log.jsonl"},
        {"report", "report.json"},
        {"confusion", "confusion.csv"}}},
  };
  {
    std::ofstream mf(out_dir / "manifest.json");
    if (!mf) throw IoError("cannot write manifest in " + out_dir.string());
    mf << manifest.dump(2) << '\n';
  }

  std::ofstream log(out_dir / "log.jsonl");
  if (!log) throw IoError("cannot write log in " + out_dir.string());

  Trainer trainer(std::move(splits), cfg);
  trainer.run([&](const std::string& line) {
    log << line << '\n';
    if (echo) {
      json j = json::parse(line);
      if (j["type"] == "epoch")
        std::cout << "epoch " << j["epoch"] << " val_wf1 " << j["val_wf1"]
                  << " best " << j["best_val_wf1"] << std::endl;
    }
  });

  save_checkpoint(trainer.make_checkpoint(), (out_dir / "checkpoint.ckpt").string());

  Corpus test = split_corpus(corpus, ratios, split_seed).test;
  RunResult result;
  result.test = trainer.evaluate_best(test);
  result.dir = out_dir;
  {
    std::ofstream rf(out_dir / "report.json");
    rf << metrics_to_json(result.test, corpus.meta.class_names) << '\n';
    std::ofstream cf(out_dir / "confusion.csv");
    cf << confusion_to_csv(result.test, corpus.meta.class_names);
  }
  result.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  manifest["finished_utc"] = utc_now();
  manifest["metrics"] = {{"test_waa", result.test.waa},
                         {"test_wf1", result.test.wf1},
                         {"best_val_wf1", trainer.best_val_wf1()},
                         {"seconds", result.seconds}};
  std::ofstream mf(out_dir / "manifest.json");
  mf << manifest.dump(2) << '\n';
  return result;
}

int cmd_synth(const SyntheticSpec& spec, const std::string& output) {
  Corpus corpus = generate_synthetic(spec);
  save_corpus(corpus, output);
  std::vector<std::size_t> histogram(spec.class_count, 0);
  for (const auto& d : corpus.dialogues)
    for (const auto& u : d.utterances) ++histogram[u.label];
  json summary = {
      {"output", output},
      {"dialogues", corpus.dialogues.size()},
      {"utterances", corpus.total_utterances()},
      {"class_histogram", histogram},
      {"oracle_accuracy",
       {{"text", nearest_center_accuracy(corpus, 0)},
        {"audio", nearest_center_accuracy(corpus, 1)},
        {"visual", nearest_center_accuracy(corpus, 2)}}},
  };
  std::cout << summary.dump(2) << std::endl;
  return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& corpus_path,
             const std::string& part, const TrainFlags& flags, bool use_current) {
  Checkpoint ckpt = load_checkpoint(ckpt_path);
  TrainConfig cfg;
  Model model = model_from_checkpoint(ckpt, &cfg, /*best=*/!use_current);
  Corpus corpus = load_corpus(corpus_path);
  if (part != "all") {
    CorpusSplits splits =
        split_corpus(corpus, flags.ratios(), flags.effective_split_seed(cfg));
    if (part == "train") corpus = std::move(splits.train);
    else if (part == "val") corpus = std::move(splits.val);
    else if (part == "test") corpus = std::move(splits.test);
    else throw ConfigError("unknown split part: " + part);
  }
  MetricsReport report = evaluate_model(model, cfg, corpus);
  std::cout << metrics_to_json(report, corpus.meta.class_names) << std::endl;
  return 0;
}

int cmd_sweep(const std::string& axis, const std::vector<double>& values,
              const TrainConfig& base, const std::string& corpus_path,
              const fs::path& out_dir, const SplitRatios& ratios,
              std::uint64_t split_seed) {
  if (values.empty()) throw ConfigError("sweep needs a non-empty --values list");
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create sweep directory: " + out_dir.string());
  std::ofstream csv(out_dir / "sweep.csv");
  if (!csv) throw IoError("cannot write sweep.csv");
  csv << axis << ",waa,wf1,seconds,status\n";
  for (std::size_t i = 0; i < values.size(); ++i) {
    TrainConfig cfg = base;
    cfg.seed = base.seed + i;
    if (axis == "beta") cfg.beta = values[i];
    else if (axis == "lambda") cfg.lambda = values[i];
    else if (axis == "batch_size") cfg.batch_size = static_cast<int>(values[i]);
    else throw ConfigError("sweep axis must be beta, lambda or batch_size");
    std::ostringstream name;
    name << axis << '_' << values[i];
    try {
      RunResult r = do_train_run(cfg, corpus_path, out_dir / name.str(), ratios,
                                 split_seed, false);
      csv << values[i] << ',' << r.test.waa << ',' << r.test.wf1 << ','
          << r.seconds << ",ok\n";
      std::cout << axis << '=' << values[i] << " waa=" << r.test.waa
                << " wf1=" << r.test.wf1 << std::endl;
    } catch (const std::exception& e) {
      csv << values[i] << ",,,," << "error: " << e.what() << '\n';
      std::cout << axis << '=' << values[i] << " failed: " << e.what() << std::endl;
    }
    csv.flush();
  }
  std::cout << "wrote " << (out_dir / "sweep.csv").string() << std::endl;
  return 0;
}

int cmd_reproduce(const std::string& manifest_arg, const fs::path& out_dir) {
  fs::path mpath(manifest_arg);
  if (fs::is_directory(mpath)) mpath /= "manifest.json";
  std::ifstream in(mpath);
  if (!in) throw IoError("cannot open manifest: " + mpath.string());
  json manifest = json::parse(in, nullptr, true);
  if (!manifest.contains("metrics"))
    throw DataError("manifest has no recorded metrics; was the run completed?");

  TrainConfig cfg = config_from_json(manifest["config"].dump());
  std::string corpus_path = manifest["corpus"]["path"].get<std::string>();
  std::string want_fp = manifest["corpus"]["fingerprint"].get<std::string>();
  if (file_fingerprint(corpus_path) != want_fp)
    throw DataError("corpus file changed since the recorded run: " + corpus_path);
  SplitRatios ratios{manifest["split"]["train"].get<double>(),
                     manifest["split"]["val"].get<double>(),
                     manifest["split"]["test"].get<double>()};
  std::uint64_t split_seed = manifest["split"]["seed"].get<std::uint64_t>();

  RunResult r = do_train_run(cfg, corpus_path, out_dir, ratios, split_seed, false);
  double waa0 = manifest["metrics"]["test_waa"].get<double>();
  double wf10 = manifest["metrics"]["test_wf1"].get<double>();
  double dw = std::abs(r.test.waa - waa0), df = std::abs(r.test.wf1 - wf10);
  json verdict = {{"recorded", {{"waa", waa0}, {"wf1", wf10}}},
                  {"replayed", {{"waa", r.test.waa}, {"wf1", r.test.wf1}}},
                  {"max_delta", std::max(dw, df)},
                  {"match", dw <= 1e-12 && df <= 1e-12}};
  std::cout << verdict.dump(2) << std::endl;
  return (dw <= 1e-12 && df <= 1e-12) ? 0 : 1;
}

int cmd_export_graph(const std::string& corpus_path, const std::string& dialogue_id,
                     std::size_t window, bool single_relation,
                     const std::string& ckpt_path, const std::string& output) {
  Corpus corpus = load_corpus(corpus_path);
  const Dialogue* dlg = nullptr;
  for (const auto& d : corpus.dialogues)
    if (d.dialogue_id == dialogue_id) dlg = &d;
  if (!dlg) throw DataError("dialogue not found: " + dialogue_id);
  SpeakerGraph graph = build_graph(*dlg, window, single_relation);
  if (!ckpt_path.empty()) {
    Checkpoint ckpt = load_checkpoint(ckpt_path);
    TrainConfig cfg;
    Model model = model_from_checkpoint(ckpt, &cfg, /*best=*/true);
    auto active = cfg.active_modalities();
    // Attention weights from the first stream over its projected features.
    const MlpParams& proj = active[0] == 0   ? model.projection.text
                            : active[0] == 1 ? model.projection.audio
                                             : model.projection.visual;
    Matrix x(dlg->utterances.size(), proj.input_dim());
    for (std::size_t i = 0; i < dlg->utterances.size(); ++i) {
      const auto& f = active[0] == 0   ? dlg->utterances[i].text_feat
                      : active[0] == 1 ? dlg->utterances[i].audio_feat
                                       : dlg->utterances[i].visual_feat;
      std::copy(f.begin(), f.end(), x.row(i));
    }
    gcn_apply(graph, model.gcns[0], mlp_apply(proj, x), cfg.gcn_self_term);
  }
  std::string text = export_edge_list(graph);
  if (output.empty() || output == "-") {
    std::cout << text;
  } else {
    std::ofstream out(output);
    if (!out) throw IoError("cannot write " + output);
    out << text;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dialogue emotion recognition pipeline"};
  app.require_subcommand(1);

  std::string kernels_env;
  if (const char* k = std::getenv("ARIIGN_KERNELS")) kernels_env = k;

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus");
  SyntheticSpec spec;
  std::string synth_out = "corpus.jsonl";
  std::vector<double> noise;
  synth->add_option("--classes", spec.class_count);
  synth->add_option("--dialogues", spec.dialogues);
  synth->add_option("--utterances", spec.utterances_per_dialogue);
  synth->add_option("--speakers", spec.speakers_per_dialogue);
  synth->add_option("--dim-text", spec.dim_text);
  synth->add_option("--dim-audio", spec.dim_audio);
  synth->add_option("--dim-visual", spec.dim_visual);
  synth->add_option("--sep", spec.separation);
  synth->add_option("--noise", noise, "per-modality noise scales: text audio visual")
      ->expected(3);
  synth->add_option("--seed", spec.seed);
  synth->add_option("-o,--output", synth_out);

  // train
  auto* train = app.add_subcommand("train", "train on a corpus file");
  std::string train_corpus, train_out = "run";
  TrainFlags train_flags;
  train->add_option("--corpus", train_corpus)->required();
  train->add_option("--out", train_out, "run directory");
  train_flags.attach(train);

  // eval
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  std::string eval_ckpt, eval_corpus, eval_part = "all";
  bool eval_current = false;
  TrainFlags eval_flags;
  eval->add_option("--checkpoint", eval_ckpt)->required();
  eval->add_option("--corpus", eval_corpus)->required();
  eval->add_option("--split", eval_part, "all|train|val|test");
  eval->add_flag("--current", eval_current,
                 "use the last-epoch weights instead of the best-validation ones");
  eval->add_option("--train-ratio", eval_flags.train_ratio);
  eval->add_option("--val-ratio", eval_flags.val_ratio);
  eval->add_option("--test-ratio", eval_flags.test_ratio);
  eval->add_option("--split-seed", eval_flags.split_seed)
      ->each([&eval_flags](const std::string&) { eval_flags.split_seed_set = true; });

  // sweep
  auto* sweep = app.add_subcommand("sweep", "run one training per axis value");
  std::string sweep_corpus, sweep_out = "sweep", sweep_axis;
  std::vector<double> sweep_values;
  TrainFlags sweep_flags;
  sweep->add_option("--corpus", sweep_corpus)->required();
  sweep->add_option("--out", sweep_out);
  sweep->add_option("--axis", sweep_axis, "beta|lambda|batch_size")->required();
  sweep->add_option("--values", sweep_values)->required()->delimiter(',');
  sweep_flags.attach(sweep);

  // reproduce
  auto* repro = app.add_subcommand("reproduce", "replay a recorded run and compare");
  std::string repro_manifest, repro_out = "reproduce-run";
  repro->add_option("--manifest", repro_manifest, "run directory or manifest.json")
      ->required();
  repro->add_option("--out", repro_out);

  // export-graph
  auto* exportg = app.add_subcommand("export-graph", "dump a dialogue graph edge list");
  std::string eg_corpus, eg_dialogue, eg_ckpt, eg_out;
  std::size_t eg_window = 10;
  bool eg_single = false;
  exportg->add_option("--corpus", eg_corpus)->required();
  exportg->add_option("--dialogue", eg_dialogue)->required();
  exportg->add_option("--window", eg_window);
  exportg->add_flag("--single-relation", eg_single);
  exportg->add_option("--checkpoint", eg_ckpt,
                      "optional; fills attention weights from a trained model");
  exportg->add_option("-o,--output", eg_out, "file path or - for stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (!kernels_env.empty()) kernels::force_backend(kernels_env);
    if (*synth) {
      if (synth->count("--seed") == 0) spec.seed = env_seed_or(spec.seed);
      if (!noise.empty()) spec.noise = {noise[0], noise[1], noise[2]};
      return cmd_synth(spec, synth_out);
    }
    if (*train) {
      TrainConfig cfg = train_flags.resolve(train);
      RunResult r = do_train_run(cfg, train_corpus, train_out, train_flags.ratios(),
                                 train_flags.effective_split_seed(cfg), true);
      json out = {{"run_dir", fs::absolute(r.dir).string()},
                  {"test_waa", r.test.waa},
                  {"test_wf1", r.test.wf1},
                  {"seconds", r.seconds}};
      std::cout << out.dump(2) << std::endl;
      return 0;
    }
    if (*eval) return cmd_eval(eval_ckpt, eval_corpus, eval_part, eval_flags, eval_current);
    if (*sweep) {
      TrainConfig cfg = sweep_flags.resolve(sweep);
      return cmd_sweep(sweep_axis, sweep_values, cfg, sweep_corpus, sweep_out,
                       sweep_flags.ratios(), sweep_flags.effective_split_seed(cfg));
    }
    if (*repro) return cmd_reproduce(repro_manifest, repro_out);
    if (*exportg)
      return cmd_export_graph(eg_corpus, eg_dialogue, eg_window, eg_single, eg_ckpt,
                              eg_out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << std::endl;
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << std::endl;
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << std::endl;
    return 4;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << std::endl;
    return 5;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  return 0;
}
