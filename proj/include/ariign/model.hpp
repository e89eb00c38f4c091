#pragma once

// Full parameter set for one run plus checkpoint serialization and the
// JSON form of the training configuration.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ariign/classifier.hpp"
#include "ariign/corpus.hpp"
#include "ariign/gcl.hpp"
#include "ariign/mlp.hpp"
#include "ariign/projection.hpp"
#include "ariign/relgraph.hpp"
#include "ariign/tgan.hpp"

namespace ariign {

inline constexpr const char* kCheckpointMagic = "ariign-ckpt-v1";

enum class FusionMode { CrossModal, Add, Concat };

struct TrainConfig {
  int epochs = 60;
  int gan_epochs = 10;
  // Utterances per optimization step. Phase 2 packs whole dialogues until a
  // batch reaches this count.
  int batch_size = 32;
  double lr = 0.0005;
  double dropout = 0.5;
  double weight_decay = 1e-5;
  std::size_t window = 10;
  std::size_t d = 128;
  double beta = 0.8;
  double lambda = 0.5;
  std::uint64_t seed = 0;
  bool use_tgan = true;
  bool use_imcl = true;
  bool use_iccl = true;
  std::array<bool, 3> modalities = {true, true, true};  // text, audio, visual
  FusionMode fusion = FusionMode::CrossModal;
  GanInputMode gan_input_mode = GanInputMode::PerSourcePad;
  // The adversarial phase updates generator and discriminator parameters
  // only; unfreezing lets the source projections train through the
  // generator loss as an alternative reading.
  bool gan_freeze_projection = true;
  int gan_generator_steps = 1;
  int gan_discriminator_steps = 1;
  SelfTermMode gcn_self_term = SelfTermMode::OncePerRelation;
  std::size_t gcn_layers = 2;
  bool single_relation = false;
  SimilarityMode gcl_similarity = SimilarityMode::BoundedCosine;
  RegTarget gcl_reg_target = RegTarget::Positives;
  ImclPositiveRule gcl_imcl_positive_rule = ImclPositiveRule::CrossModal;
  std::size_t contrast_samples = 128;

  std::vector<int> active_modalities() const {
    std::vector<int> out;
    for (int m = 0; m < 3; ++m)
      if (modalities[static_cast<std::size_t>(m)]) out.push_back(m);
    return out;
  }
  // Throws ConfigError on inconsistent settings (e.g. IMCL with a single
  // modality stream).
  void validate() const;
  bool imcl_active() const;
  bool tgan_active() const;
};

std::string config_to_json(const TrainConfig& cfg);
TrainConfig config_from_json(const std::string& json_text);

struct Model {
  CorpusMeta meta;
  ProjectionParams projection;
  std::array<GanPair, 3> gans;
  // One GCN stream per active modality for cross-modal fusion; a single
  // stream (index 0) for add/concat fusion.
  std::vector<GcnParams> gcns;
  ClassifierParams classifier;
};

// Parameter draw order is fixed: projection (t, a, v), GAN pairs (T, A, V),
// GCN streams, classifier.
Model make_model(const TrainConfig& cfg, const CorpusMeta& meta, Rng& rng);

std::vector<NamedParam> named_params(Model& model);

struct Checkpoint {
  std::string config_json;
  CorpusMeta meta;
  int gan_epochs_done = 0;
  int epochs_done = 0;
  double best_val_wf1 = -1.0;
  std::string rng_state;
  std::map<std::string, int> adam_steps;
  // name -> tensor; includes "best/" copies and "adam_m/", "adam_v/" state
  std::map<std::string, Matrix> tensors;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace ariign
