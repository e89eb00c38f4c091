#include "ariign/model.hpp"

#include <cstring>
#include <fstream>

#include <json.hpp>

#include "ariign/errors.hpp"

namespace ariign {

using nlohmann::json;

bool TrainConfig::imcl_active() const {
  return use_imcl && fusion == FusionMode::CrossModal && active_modalities().size() >= 2;
}

bool TrainConfig::tgan_active() const {
  return use_tgan && fusion == FusionMode::CrossModal && active_modalities().size() == 3;
}

void TrainConfig::validate() const {
  if (epochs < 0 || gan_epochs < 0) throw ConfigError("epochs must be >= 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (lr <= 0.0) throw ConfigError("lr must be positive");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must be in [0,1)");
  if (beta < 0.0 || beta > 1.0) throw ConfigError("beta must be in [0,1]");
  if (lambda < 0.0 || lambda > 1.0) throw ConfigError("lambda must be in [0,1]");
  if (d < 1) throw ConfigError("d must be >= 1");
  if (gcn_layers < 1) throw ConfigError("gcn_layers must be >= 1");
  auto active = active_modalities();
  if (active.empty()) throw ConfigError("at least one modality must be enabled");
  if (use_imcl && fusion == FusionMode::CrossModal && active.size() < 2)
    throw ConfigError(
        "IMCL needs at least two modality streams; disable it (--ablate imcl) "
        "or enable more modalities");
}

namespace {

const char* fusion_name(FusionMode f) {
  switch (f) {
    case FusionMode::CrossModal: return "cross_modal";
    case FusionMode::Add: return "add";
    case FusionMode::Concat: return "concat";
  }
  return "?";
}

FusionMode fusion_from(const std::string& s) {
  if (s == "cross_modal") return FusionMode::CrossModal;
  if (s == "add") return FusionMode::Add;
  if (s == "concat") return FusionMode::Concat;
  throw ConfigError("unknown fusion mode: " + s);
}

}  // namespace

std::string config_to_json(const TrainConfig& cfg) {
  json j;
  j["epochs"] = cfg.epochs;
  j["gan_epochs"] = cfg.gan_epochs;
  j["batch_size"] = cfg.batch_size;
  j["lr"] = cfg.lr;
  j["dropout"] = cfg.dropout;
  j["weight_decay"] = cfg.weight_decay;
  j["window"] = cfg.window;
  j["d"] = cfg.d;
  j["beta"] = cfg.beta;
  j["lambda"] = cfg.lambda;
  j["seed"] = cfg.seed;
  j["use_tgan"] = cfg.use_tgan;
  j["use_imcl"] = cfg.use_imcl;
  j["use_iccl"] = cfg.use_iccl;
  j["modalities"] = {cfg.modalities[0], cfg.modalities[1], cfg.modalities[2]};
  j["fusion"] = fusion_name(cfg.fusion);
  j["gan_input_mode"] =
      cfg.gan_input_mode == GanInputMode::PerSourcePad ? "per_source_pad" : "concat_joint";
  j["gan_freeze_projection"] = cfg.gan_freeze_projection;
  j["gan_generator_steps"] = cfg.gan_generator_steps;
  j["gan_discriminator_steps"] = cfg.gan_discriminator_steps;
  j["gcn_self_term"] = cfg.gcn_self_term == SelfTermMode::OncePerRelation
                           ? "once_per_relation"
                           : "literal_per_neighbor";
  j["gcn_layers"] = cfg.gcn_layers;
  j["single_relation"] = cfg.single_relation;
  j["gcl_similarity"] = cfg.gcl_similarity == SimilarityMode::BoundedCosine
                            ? "bounded_cosine"
                            : "softmaxed_dot";
  j["gcl_reg_target"] =
      cfg.gcl_reg_target == RegTarget::Positives ? "positives" : "literal_delta";
  j["gcl_imcl_positive_rule"] =
      cfg.gcl_imcl_positive_rule == ImclPositiveRule::CrossModal ? "cross_modal"
                                                                 : "literal_same_modal";
  j["contrast_samples"] = cfg.contrast_samples;
  return j.dump();
}

TrainConfig config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError("config parse error: " + std::string(e.what()));
  }
  TrainConfig cfg;
  try {
    cfg.epochs = j.value("epochs", cfg.epochs);
    cfg.gan_epochs = j.value("gan_epochs", cfg.gan_epochs);
    cfg.batch_size = j.value("batch_size", cfg.batch_size);
    cfg.lr = j.value("lr", cfg.lr);
    cfg.dropout = j.value("dropout", cfg.dropout);
    cfg.weight_decay = j.value("weight_decay", cfg.weight_decay);
    cfg.window = j.value("window", cfg.window);
    cfg.d = j.value("d", cfg.d);
    cfg.beta = j.value("beta", cfg.beta);
    cfg.lambda = j.value("lambda", cfg.lambda);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.use_tgan = j.value("use_tgan", cfg.use_tgan);
    cfg.use_imcl = j.value("use_imcl", cfg.use_imcl);
    cfg.use_iccl = j.value("use_iccl", cfg.use_iccl);
    if (j.contains("modalities")) {
      auto m = j["modalities"].get<std::vector<bool>>();
      if (m.size() != 3) throw ConfigError("modalities must have 3 entries");
      for (int i = 0; i < 3; ++i) cfg.modalities[i] = m[i];
    }
    cfg.fusion = fusion_from(j.value("fusion", std::string("cross_modal")));
    cfg.gan_input_mode = j.value("gan_input_mode", std::string("per_source_pad")) ==
                                 "concat_joint"
                             ? GanInputMode::ConcatJoint
                             : GanInputMode::PerSourcePad;
    cfg.gan_freeze_projection = j.value("gan_freeze_projection", cfg.gan_freeze_projection);
    cfg.gan_generator_steps = j.value("gan_generator_steps", cfg.gan_generator_steps);
    cfg.gan_discriminator_steps =
        j.value("gan_discriminator_steps", cfg.gan_discriminator_steps);
    cfg.gcn_self_term =
        j.value("gcn_self_term", std::string("once_per_relation")) == "literal_per_neighbor"
            ? SelfTermMode::PerNeighbor
            : SelfTermMode::OncePerRelation;
    cfg.gcn_layers = j.value("gcn_layers", cfg.gcn_layers);
    cfg.single_relation = j.value("single_relation", cfg.single_relation);
    cfg.gcl_similarity =
        j.value("gcl_similarity", std::string("bounded_cosine")) == "softmaxed_dot"
            ? SimilarityMode::SoftmaxedDot
            : SimilarityMode::BoundedCosine;
    cfg.gcl_reg_target =
        j.value("gcl_reg_target", std::string("positives")) == "literal_delta"
            ? RegTarget::LiteralDelta
            : RegTarget::Positives;
    cfg.gcl_imcl_positive_rule =
        j.value("gcl_imcl_positive_rule", std::string("cross_modal")) ==
                "literal_same_modal"
            ? ImclPositiveRule::LiteralSameModal
            : ImclPositiveRule::CrossModal;
    cfg.contrast_samples = j.value("contrast_samples", cfg.contrast_samples);
  } catch (const json::exception& e) {
    throw ConfigError("malformed config: " + std::string(e.what()));
  }
  return cfg;
}

namespace {

std::size_t stream_width(const TrainConfig& cfg) {
  std::size_t n_active = cfg.active_modalities().size();
  return cfg.fusion == FusionMode::Concat ? n_active * cfg.d : cfg.d;
}

std::size_t stream_count(const TrainConfig& cfg) {
  return cfg.fusion == FusionMode::CrossModal ? cfg.active_modalities().size() : 1;
}

}  // namespace

Model make_model(const TrainConfig& cfg, const CorpusMeta& meta, Rng& rng) {
  Model model;
  model.meta = meta;
  model.projection = make_projection(meta.dim_text, meta.dim_audio, meta.dim_visual,
                                     cfg.d, cfg.dropout, rng);
  model.gans[0] = make_gan_pair(Modality::Text, cfg.d, rng);
  model.gans[1] = make_gan_pair(Modality::Audio, cfg.d, rng);
  model.gans[2] = make_gan_pair(Modality::Visual, cfg.d, rng);
  std::size_t width = stream_width(cfg);
  for (std::size_t s = 0; s < stream_count(cfg); ++s)
    model.gcns.push_back(make_gcn(width, cfg.gcn_layers, cfg.single_relation, rng));
  std::size_t fused = stream_count(cfg) * width;
  model.classifier =
      make_classifier(fused, cfg.d, meta.class_count, cfg.dropout, rng);
  return model;
}

std::vector<NamedParam> named_params(Model& model) {
  std::vector<NamedParam> out;
  collect_mlp_params("proj.text", model.projection.text, out);
  collect_mlp_params("proj.audio", model.projection.audio, out);
  collect_mlp_params("proj.visual", model.projection.visual, out);
  const char* gan_names[3] = {"gan.t", "gan.a", "gan.v"};
  for (int m = 0; m < 3; ++m) {
    collect_mlp_params(std::string(gan_names[m]) + ".gen", model.gans[m].generator, out);
    collect_mlp_params(std::string(gan_names[m]) + ".disc", model.gans[m].discriminator,
                       out);
  }
  for (std::size_t s = 0; s < model.gcns.size(); ++s) {
    std::string p = "gcn." + std::to_string(s);
    GcnParams& g = model.gcns[s];
    out.push_back({p + ".attn_hidden", &g.attn_hidden});
    out.push_back({p + ".attn_out", &g.attn_out});
    for (std::size_t r = 0; r < g.relation_w.size(); ++r)
      out.push_back({p + ".rel" + std::to_string(r), &g.relation_w[r]});
    out.push_back({p + ".self", &g.self_w});
  }
  collect_mlp_params("cls", model.classifier.mlp, out);
  return out;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint: " + path);
  json meta;
  meta["magic"] = kCheckpointMagic;
  meta["config"] = json::parse(ckpt.config_json);
  meta["corpus"] = {{"class_count", ckpt.meta.class_count},
                    {"class_names", ckpt.meta.class_names},
                    {"dims",
                     {{"text", ckpt.meta.dim_text},
                      {"audio", ckpt.meta.dim_audio},
                      {"visual", ckpt.meta.dim_visual}}}};
  meta["gan_epochs_done"] = ckpt.gan_epochs_done;
  meta["epochs_done"] = ckpt.epochs_done;
  meta["best_val_wf1"] = ckpt.best_val_wf1;
  meta["rng_state"] = ckpt.rng_state;
  meta["adam_steps"] = ckpt.adam_steps;
  std::string header = meta.dump();
  std::uint64_t hlen = header.size();
  out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  std::uint64_t count = ckpt.tensors.size();
  out.write(reinterpret_cast<const char*>(&count), sizeof(count));
  for (const auto& [name, tensor] : ckpt.tensors) {
    std::uint64_t nlen = name.size();
    out.write(reinterpret_cast<const char*>(&nlen), sizeof(nlen));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    std::uint64_t rows = tensor.rows(), cols = tensor.cols();
    out.write(reinterpret_cast<const char*>(&rows), sizeof(rows));
    out.write(reinterpret_cast<const char*>(&cols), sizeof(cols));
    out.write(reinterpret_cast<const char*>(tensor.data()),
              static_cast<std::streamsize>(tensor.size() * sizeof(double)));
  }
  if (!out) throw IoError("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  std::uint64_t hlen = 0;
  in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
  std::string header(hlen, '\0');
  in.read(header.data(), static_cast<std::streamsize>(hlen));
  if (!in) throw IoError("checkpoint truncated: " + path);
  json meta;
  try {
    meta = json::parse(header);
  } catch (const json::exception& e) {
    throw DataError("checkpoint header parse error: " + std::string(e.what()));
  }
  if (meta.value("magic", "") != kCheckpointMagic)
    throw DataError("not an " + std::string(kCheckpointMagic) + " file: " + path);
  Checkpoint ckpt;
  ckpt.config_json = meta["config"].dump();
  if (meta.contains("corpus")) {
    const json& c = meta["corpus"];
    ckpt.meta.class_count = c.value("class_count", 0);
    ckpt.meta.class_names = c.value("class_names", std::vector<std::string>{});
    ckpt.meta.dim_text = c["dims"].value("text", std::size_t{0});
    ckpt.meta.dim_audio = c["dims"].value("audio", std::size_t{0});
    ckpt.meta.dim_visual = c["dims"].value("visual", std::size_t{0});
  }
  ckpt.gan_epochs_done = meta.value("gan_epochs_done", 0);
  ckpt.epochs_done = meta.value("epochs_done", 0);
  ckpt.best_val_wf1 = meta.value("best_val_wf1", -1.0);
  ckpt.rng_state = meta.value("rng_state", std::string());
  if (meta.contains("adam_steps"))
    ckpt.adam_steps = meta["adam_steps"].get<std::map<std::string, int>>();
  std::uint64_t count = 0;
  in.read(reinterpret_cast<char*>(&count), sizeof(count));
  for (std::uint64_t i = 0; i < count; ++i) {
    std::uint64_t nlen = 0, rows = 0, cols = 0;
    in.read(reinterpret_cast<char*>(&nlen), sizeof(nlen));
    std::string name(nlen, '\0');
    in.read(name.data(), static_cast<std::streamsize>(nlen));
    in.read(reinterpret_cast<char*>(&rows), sizeof(rows));
    in.read(reinterpret_cast<char*>(&cols), sizeof(cols));
    Matrix t(rows, cols);
    in.read(reinterpret_cast<char*>(t.data()),
            static_cast<std::streamsize>(t.size() * sizeof(double)));
    if (!in) throw IoError("checkpoint truncated while reading tensor " + name);
    ckpt.tensors.emplace(std::move(name), std::move(t));
  }
  return ckpt;
}

}  // namespace ariign
