#pragma once

// Two-phase training loop: adversarial alignment first, then the graph
// contrastive + classification phase. One Adam optimizer keyed by parameter
// name; one seeded generator drives every random draw in a fixed order
// (per-epoch shuffles, dropout masks, contrastive subsampling).

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "ariign/model.hpp"
#include "ariign/metrics.hpp"

namespace ariign {

struct LossBundle {
  double gen_t = 0.0, gen_a = 0.0, gen_v = 0.0;
  double disc_t = 0.0, disc_a = 0.0, disc_v = 0.0;
  double disc_real_mean = 0.0, disc_fake_mean = 0.0;
  double iccl = 0.0, imcl = 0.0, hybrid = 0.0, cls = 0.0, overall = 0.0;
  std::size_t iccl_skipped = 0, imcl_skipped = 0;
};

// L_overall = L_CLS + lambda * imcl + (1 - lambda) * iccl; disabled
// components contribute zero. Throws NumericError on non-finite inputs.
double overall_loss(double cls, double imcl, double iccl, double lambda, bool use_imcl,
                    bool use_iccl);

class Adam {
 public:
  Adam() = default;
  Adam(double lr, double weight_decay) : lr_(lr), weight_decay_(weight_decay) {}
  void apply(const std::string& name, Matrix& param, const Matrix& grad);

  std::map<std::string, int>& steps() { return steps_; }
  std::map<std::string, Matrix>& moment1() { return m_; }
  std::map<std::string, Matrix>& moment2() { return v_; }
  const std::map<std::string, int>& steps() const { return steps_; }
  const std::map<std::string, Matrix>& moment1() const { return m_; }
  const std::map<std::string, Matrix>& moment2() const { return v_; }

 private:
  double lr_ = 0.0005;
  double weight_decay_ = 1e-5;
  std::map<std::string, int> steps_;
  std::map<std::string, Matrix> m_, v_;
};

using LogSink = std::function<void(const std::string&)>;

class Trainer {
 public:
  struct LeafEntry {
    Matrix* param;
    Var var;
  };
  // Binds parameter matrices onto a tape, either as differentiable leaves
  // (training) or as constants (evaluation). Defined in trainer.cpp.
  struct LeafMap;

  Trainer(CorpusSplits splits, TrainConfig cfg);

  // Runs whatever remains of both phases, including per-epoch validation
  // and best-model tracking.
  void run(const LogSink& sink = nullptr);
  void run_gan_epoch(const LogSink& sink = nullptr);
  void run_main_epoch(const LogSink& sink = nullptr);

  MetricsReport evaluate_current(const Corpus& corpus) const;
  MetricsReport evaluate_best(const Corpus& corpus) const;

  Checkpoint make_checkpoint() const;
  void restore(const Checkpoint& ckpt);

  Model& model() { return model_; }
  const TrainConfig& config() const { return cfg_; }
  int gan_epochs_done() const { return gan_epochs_done_; }
  int epochs_done() const { return epochs_done_; }
  double best_val_wf1() const { return best_val_wf1_; }
  const std::vector<std::string>& log_lines() const { return log_; }
  const LossBundle& last_bundle() const { return last_bundle_; }

 private:
  void gan_batch(const std::vector<std::size_t>& utt_batch, LossBundle& bundle);
  void main_batch(const std::vector<std::size_t>& dlg_batch, LossBundle& bundle);
  void after_epoch(const LogSink& sink);
  void emit(const LogSink& sink, const std::string& line);
  void optimizer_step(const LeafMap& leaves, const Tape& tape);

  // Raw feature matrix of one modality over the given utterances.
  Matrix gather_features(const Corpus& corpus, const std::vector<std::size_t>& utts,
                         int modality) const;

  CorpusSplits splits_;
  TrainConfig cfg_;
  Rng rng_;
  Model model_;
  Model best_model_;
  Adam adam_;
  std::map<const Matrix*, std::string> param_names_;
  int gan_epochs_done_ = 0;
  int epochs_done_ = 0;
  double best_val_wf1_ = -1.0;
  std::size_t step_ = 0;
  std::vector<std::string> log_;
  LossBundle last_bundle_;

  // Flat utterance index over the training split.
  std::vector<std::pair<std::size_t, std::size_t>> train_utts_;  // (dialogue, utt)
};

// Rebuilds a Model (current weights) from a checkpoint.
Model model_from_checkpoint(const Checkpoint& ckpt, TrainConfig* cfg_out = nullptr,
                            bool best = false);

// Eval-mode pipeline over a corpus; no parameter mutation.
MetricsReport evaluate_model(const Model& model, const TrainConfig& cfg,
                             const Corpus& corpus);
std::vector<int> predict_model(const Model& model, const TrainConfig& cfg,
                               const Corpus& corpus);

}  // namespace ariign
