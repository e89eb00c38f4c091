#include "ariign/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "ariign/errors.hpp"

namespace ariign {

using nlohmann::json;

double overall_loss(double cls, double imcl, double iccl, double lambda, bool use_imcl,
                    bool use_iccl) {
  double im = use_imcl ? imcl : 0.0;
  double ic = use_iccl ? iccl : 0.0;
  double total = cls + lambda * im + (1.0 - lambda) * ic;
  if (!std::isfinite(total))
    throw NumericError("overall_loss: non-finite components (cls=" +
                       std::to_string(cls) + ", imcl=" + std::to_string(im) +
                       ", iccl=" + std::to_string(ic) + ")");
  return total;
}

void Adam::apply(const std::string& name, Matrix& param, const Matrix& grad) {
  if (!param.same_shape(grad)) throw ShapeError("Adam: grad shape mismatch for " + name);
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  auto [mit, inserted_m] = m_.try_emplace(name, param.rows(), param.cols());
  auto [vit, inserted_v] = v_.try_emplace(name, param.rows(), param.cols());
  (void)inserted_m;
  (void)inserted_v;
  int& t = steps_[name];
  ++t;
  Matrix& m = mit->second;
  Matrix& v = vit->second;
  double bc1 = 1.0 - std::pow(b1, t);
  double bc2 = 1.0 - std::pow(b2, t);
  for (std::size_t i = 0; i < param.size(); ++i) {
    double g = grad.data()[i] + weight_decay_ * param.data()[i];
    m.data()[i] = b1 * m.data()[i] + (1.0 - b1) * g;
    v.data()[i] = b2 * v.data()[i] + (1.0 - b2) * g * g;
    double mhat = m.data()[i] / bc1;
    double vhat = v.data()[i] / bc2;
    param.data()[i] -= lr_ * mhat / (std::sqrt(vhat) + eps);
  }
}

// ---------------------------------------------------------------------------
// Parameter binding

struct Trainer::LeafMap {
  Tape& tape;
  bool trainable;
  std::vector<LeafEntry> entries;

  Var bind(Matrix& m) {
    Var v = tape.leaf(m, trainable);
    if (trainable) entries.push_back({&m, v});
    return v;
  }
  MlpVars bind_mlp(MlpParams& p) {
    MlpVars v;
    for (auto& layer : p.layers) {
      v.weights.push_back(bind(layer.weight));
      v.biases.push_back(bind(layer.bias));
    }
    return v;
  }
  GcnVars bind_gcn(GcnParams& p) {
    GcnVars v;
    v.attn_hidden = bind(p.attn_hidden);
    v.attn_out = bind(p.attn_out);
    for (auto& w : p.relation_w) v.relation_w.push_back(bind(w));
    v.self_w = bind(p.self_w);
    return v;
  }
};

namespace {

MlpVars const_mlp(Tape& tape, const MlpParams& p) {
  MlpVars v;
  for (const auto& layer : p.layers) {
    v.weights.push_back(tape.constant(layer.weight));
    v.biases.push_back(tape.constant(layer.bias));
  }
  return v;
}

MlpParams& proj_of(ProjectionParams& p, int modality) {
  return modality == 0 ? p.text : modality == 1 ? p.audio : p.visual;
}
const MlpParams& proj_of(const ProjectionParams& p, int modality) {
  return modality == 0 ? p.text : modality == 1 ? p.audio : p.visual;
}

const std::vector<double>& feat_of(const Utterance& u, int modality) {
  return modality == 0 ? u.text_feat : modality == 1 ? u.audio_feat : u.visual_feat;
}

Matrix stack_features(const Corpus& corpus, const std::vector<std::size_t>& dialogue_ids,
                      int modality) {
  std::size_t dim = modality == 0   ? corpus.meta.dim_text
                    : modality == 1 ? corpus.meta.dim_audio
                                    : corpus.meta.dim_visual;
  std::size_t n = 0;
  for (std::size_t d : dialogue_ids) n += corpus.dialogues[d].utterances.size();
  Matrix x(n, dim);
  std::size_t r = 0;
  for (std::size_t d : dialogue_ids)
    for (const Utterance& u : corpus.dialogues[d].utterances) {
      const auto& f = feat_of(u, modality);
      std::copy(f.begin(), f.end(), x.row(r));
      ++r;
    }
  return x;
}

struct PipelineOut {
  std::vector<Var> psi;  // per stream, rows aligned with batch utterances
  Var probs;
  std::vector<int> labels;
};

// Shared forward for training (trainable binder) and evaluation (constants).
PipelineOut forward_pipeline(Tape& tape, Trainer::LeafMap& leaves, Model& model,
                             const TrainConfig& cfg, const Corpus& corpus,
                             const std::vector<std::size_t>& dialogue_ids, Mode mode,
                             Rng* rng) {
  PipelineOut out;
  auto active = cfg.active_modalities();

  std::vector<std::size_t> offsets;  // start row of each dialogue
  std::size_t n = 0;
  for (std::size_t d : dialogue_ids) {
    offsets.push_back(n);
    n += corpus.dialogues[d].utterances.size();
    for (const Utterance& u : corpus.dialogues[d].utterances) out.labels.push_back(u.label);
  }

  // Projections of the active modalities, in (t, a, v) order.
  std::vector<Var> projected;
  for (int m : active) {
    Var x = tape.constant(stack_features(corpus, dialogue_ids, m));
    MlpParams& p = proj_of(model.projection, m);
    MlpVars vars = leaves.bind_mlp(p);
    projected.push_back(mlp_forward(tape, x, p, vars, mode, rng));
  }

  // Stream features per fusion mode.
  std::vector<Var> streams;
  if (cfg.fusion == FusionMode::CrossModal) {
    streams = projected;
  } else if (cfg.fusion == FusionMode::Add) {
    Var sum = projected[0];
    for (std::size_t i = 1; i < projected.size(); ++i) sum = tape.add(sum, projected[i]);
    streams.push_back(sum);
  } else {
    streams.push_back(projected.size() == 1 ? projected[0]
                                            : tape.concat_cols(projected));
  }

  // Graph stage: one graph per dialogue, shared across streams.
  std::vector<SpeakerGraph> graphs;
  graphs.reserve(dialogue_ids.size());
  for (std::size_t d : dialogue_ids)
    graphs.push_back(build_graph(corpus.dialogues[d], cfg.window, cfg.single_relation));

  for (std::size_t s = 0; s < streams.size(); ++s) {
    GcnParams& gp = model.gcns[s];
    GcnVars gv = leaves.bind_gcn(gp);
    std::vector<Var> parts;
    for (std::size_t k = 0; k < dialogue_ids.size(); ++k) {
      std::size_t t_len = corpus.dialogues[dialogue_ids[k]].utterances.size();
      Var feats = tape.slice_rows(streams[s], offsets[k], t_len);
      Var omega = edge_attention(tape, graphs[k], gp, gv, feats);
      parts.push_back(
          gcn_forward(tape, graphs[k], gp, gv, feats, omega, cfg.gcn_self_term));
    }
    out.psi.push_back(parts.size() == 1 ? parts[0] : tape.concat_rows(parts));
  }

  Var z = out.psi.size() == 1 ? out.psi[0] : tape.concat_cols(out.psi);
  MlpVars cls_vars = leaves.bind_mlp(model.classifier.mlp);
  out.probs = classify(tape, z, model.classifier, cls_vars, mode, rng);
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Trainer

Trainer::Trainer(CorpusSplits splits, TrainConfig cfg)
    : splits_(std::move(splits)), cfg_(cfg), rng_(cfg.seed) {
  cfg_.validate();
  if (splits_.train.dialogues.empty()) throw DataError("training split is empty");
  if (splits_.val.dialogues.empty()) throw DataError("validation split is empty");
  model_ = make_model(cfg_, splits_.train.meta, rng_);
  best_model_ = model_;
  adam_ = Adam(cfg_.lr, cfg_.weight_decay);
  for (const NamedParam& np : named_params(model_)) param_names_[np.tensor] = np.name;
  for (std::size_t d = 0; d < splits_.train.dialogues.size(); ++d)
    for (std::size_t u = 0; u < splits_.train.dialogues[d].utterances.size(); ++u)
      train_utts_.push_back({d, u});

  // Warn (do not fail) when a class is absent from the training split.
  std::vector<std::size_t> counts(splits_.train.meta.class_count, 0);
  for (const auto& d : splits_.train.dialogues)
    for (const auto& u : d.utterances) ++counts[u.label];
  for (int c = 0; c < splits_.train.meta.class_count; ++c)
    if (counts[c] == 0)
      log_.push_back(json{{"type", "warning"},
                          {"message", "class " + std::to_string(c) +
                                          " has no training samples"}}
                         .dump());
}

void Trainer::emit(const LogSink& sink, const std::string& line) {
  log_.push_back(line);
  if (sink) sink(line);
}

Matrix Trainer::gather_features(const Corpus& corpus,
                                const std::vector<std::size_t>& utts,
                                int modality) const {
  std::size_t dim = modality == 0   ? corpus.meta.dim_text
                    : modality == 1 ? corpus.meta.dim_audio
                                    : corpus.meta.dim_visual;
  Matrix x(utts.size(), dim);
  for (std::size_t i = 0; i < utts.size(); ++i) {
    auto [d, u] = train_utts_[utts[i]];
    const auto& f = feat_of(corpus.dialogues[d].utterances[u], modality);
    std::copy(f.begin(), f.end(), x.row(i));
  }
  return x;
}

void Trainer::optimizer_step(const LeafMap& leaves, const Tape& tape) {
  for (const LeafEntry& e : leaves.entries) {
    const Matrix& g = tape.grad(e.var);
    if (!g.all_finite())
      throw NumericError("non-finite gradient for " + param_names_.at(e.param));
    adam_.apply(param_names_.at(e.param), *e.param, g);
  }
}

void Trainer::gan_batch(const std::vector<std::size_t>& utt_batch, LossBundle& bundle) {
  // Source modalities per target, matching the generator input pairs:
  // text <- (audio, visual), audio <- (visual, text), visual <- (audio, text).
  static constexpr int kSources[3][2] = {{1, 2}, {2, 0}, {1, 0}};

  Matrix x[3];
  for (int m = 0; m < 3; ++m) x[m] = gather_features(splits_.train, utt_batch, m);

  auto project_now = [&](int m) {
    return mlp_apply(proj_of(model_.projection, m), x[m]);
  };

  double* gen_slot[3] = {&bundle.gen_t, &bundle.gen_a, &bundle.gen_v};
  double* disc_slot[3] = {&bundle.disc_t, &bundle.disc_a, &bundle.disc_v};

  for (int rep = 0; rep < cfg_.gan_discriminator_steps; ++rep) {
    for (int m = 0; m < 3; ++m) {
      {
        // Discriminator ascent on its own parameters; features are fixed.
        // Projections are trained in the generator step only, through the
        // generator, so the alignment pressure flows source -> target space.
        Tape tape;
        LeafMap leaves{tape, true, {}};
        GanVars gv;
        gv.disc = leaves.bind_mlp(model_.gans[m].discriminator);
        Var real = tape.constant(project_now(m));
        Var o1 = tape.constant(project_now(kSources[m][0]));
        Var o2 = tape.constant(project_now(kSources[m][1]));
        Var loss = discriminator_loss(tape, model_.gans[m], gv, real, o1, o2,
                                      cfg_.gan_input_mode);
        double lv = tape.value(loss)(0, 0);
        if (!std::isfinite(lv))
          throw NumericError("discriminator loss diverged (target modality " +
                             std::to_string(m) + ")");
        *disc_slot[m] = lv;
        Var objective = tape.scale(loss, -1.0);  // ascend by minimizing negation
        tape.backward(objective);
        optimizer_step(leaves, tape);
      }
    }
  }

  for (int rep = 0; rep < cfg_.gan_generator_steps; ++rep) {
    for (int m = 0; m < 3; ++m) {
      Tape tape;
      LeafMap leaves{tape, true, {}};
      GanVars gv;
      gv.gen = leaves.bind_mlp(model_.gans[m].generator);
      gv.disc = const_mlp(tape, model_.gans[m].discriminator);
      Var o1, o2;
      if (cfg_.gan_freeze_projection) {
        o1 = tape.constant(project_now(kSources[m][0]));
        o2 = tape.constant(project_now(kSources[m][1]));
      } else {
        for (int k = 0; k < 2; ++k) {
          int src = kSources[m][k];
          MlpParams& pp = proj_of(model_.projection, src);
          MlpVars pv = leaves.bind_mlp(pp);
          Var p = mlp_forward(tape, tape.constant(x[src]), pp, pv, Mode::Eval, nullptr);
          (k == 0 ? o1 : o2) = p;
        }
      }
      Var loss =
          generator_loss(tape, model_.gans[m], gv, o1, o2, cfg_.gan_input_mode);
      double lv = tape.value(loss)(0, 0);
      if (!std::isfinite(lv))
        throw NumericError("generator loss diverged (target modality " +
                           std::to_string(m) + ")");
      *gen_slot[m] = lv;
      tape.backward(loss);
      optimizer_step(leaves, tape);
    }
  }

  // Discriminator calibration snapshot on the text pair.
  Matrix real_t = project_now(0);
  Matrix fake_t = gan_generate_value(model_.gans[0], project_now(1), project_now(2));
  Matrix dr = mlp_apply(model_.gans[0].discriminator, real_t);
  Matrix df = mlp_apply(model_.gans[0].discriminator, fake_t);
  bundle.disc_real_mean = kernels::active().sum(dr.data(), dr.size()) / dr.size();
  bundle.disc_fake_mean = kernels::active().sum(df.data(), df.size()) / df.size();
}

void Trainer::run_gan_epoch(const LogSink& sink) {
  std::vector<std::size_t> order(train_utts_.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng_.shuffle(order);
  std::size_t bs = static_cast<std::size_t>(cfg_.batch_size);
  for (std::size_t start = 0; start < order.size(); start += bs) {
    std::vector<std::size_t> batch(
        order.begin() + start,
        order.begin() + std::min(order.size(), start + bs));
    LossBundle bundle;
    gan_batch(batch, bundle);
    last_bundle_ = bundle;
    ++step_;
    emit(sink, json{{"type", "gan_step"},
                    {"step", step_},
                    {"epoch", gan_epochs_done_},
                    {"gen_t", bundle.gen_t},
                    {"gen_a", bundle.gen_a},
                    {"gen_v", bundle.gen_v},
                    {"disc_t", bundle.disc_t},
                    {"disc_a", bundle.disc_a},
                    {"disc_v", bundle.disc_v},
                    {"disc_real_mean", bundle.disc_real_mean},
                    {"disc_fake_mean", bundle.disc_fake_mean}}
                  .dump());
  }
  ++gan_epochs_done_;
}

void Trainer::main_batch(const std::vector<std::size_t>& dlg_batch, LossBundle& bundle) {
  Tape tape;
  LeafMap leaves{tape, true, {}};
  PipelineOut fw = forward_pipeline(tape, leaves, model_, cfg_, splits_.train,
                                    dlg_batch, Mode::Train, &rng_);
  Var cls = cls_loss(tape, fw.probs, fw.labels);

  bool want_iccl = cfg_.use_iccl;
  bool want_imcl = cfg_.imcl_active();
  Var iccl, imcl;
  bool have_iccl = false, have_imcl = false;
  if (want_iccl || want_imcl) {
    std::size_t n = fw.labels.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    rng_.shuffle(idx);
    std::size_t k = std::min(cfg_.contrast_samples, n);
    idx.resize(k);
    std::sort(idx.begin(), idx.end());

    std::vector<Var> rows;
    ContrastTags tags;
    for (std::size_t s = 0; s < fw.psi.size(); ++s) {
      rows.push_back(tape.gather_rows(fw.psi[s], idx));
      for (std::size_t i : idx) {
        tags.modality.push_back(static_cast<int>(s));
        tags.label.push_back(fw.labels[i]);
      }
    }
    Var embeddings = rows.size() == 1 ? rows[0] : tape.concat_rows(rows);
    GclConfig gcl;
    gcl.beta = cfg_.beta;
    gcl.lambda = cfg_.lambda;
    gcl.similarity = cfg_.gcl_similarity;
    gcl.reg_target = cfg_.gcl_reg_target;
    gcl.imcl_positive_rule = cfg_.gcl_imcl_positive_rule;
    if (want_iccl) {
      try {
        GclResult r = iccl_loss(tape, embeddings, tags, gcl);
        iccl = r.loss;
        have_iccl = true;
        bundle.iccl_skipped = r.skipped_anchors;
      } catch (const DataError&) {
        bundle.iccl_skipped = tags.label.size();
      }
    }
    if (want_imcl) {
      try {
        GclResult r = imcl_loss(tape, embeddings, tags, gcl);
        imcl = r.loss;
        have_imcl = true;
        bundle.imcl_skipped = r.skipped_anchors;
      } catch (const DataError&) {
        bundle.imcl_skipped = tags.label.size();
      }
    }
  }

  Var zero = tape.scalar(0.0);
  Var hybrid = hybrid_loss(tape, have_imcl ? imcl : zero, have_iccl ? iccl : zero,
                           cfg_.lambda);
  Var total = tape.add(cls, hybrid);

  bundle.cls = tape.value(cls)(0, 0);
  bundle.iccl = have_iccl ? tape.value(iccl)(0, 0) : 0.0;
  bundle.imcl = have_imcl ? tape.value(imcl)(0, 0) : 0.0;
  bundle.hybrid = tape.value(hybrid)(0, 0);
  bundle.overall = overall_loss(bundle.cls, bundle.imcl, bundle.iccl, cfg_.lambda,
                                have_imcl, have_iccl);
  if (!std::isfinite(tape.value(total)(0, 0))) {
    throw NumericError(
        "training loss diverged: " +
        json{{"cls", bundle.cls}, {"iccl", bundle.iccl}, {"imcl", bundle.imcl}}.dump());
  }
  tape.backward(total);
  optimizer_step(leaves, tape);
}

void Trainer::run_main_epoch(const LogSink& sink) {
  std::vector<std::size_t> order(splits_.train.dialogues.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng_.shuffle(order);
  // batch_size counts utterances; whole dialogues are packed until the
  // batch reaches it, so every graph stays intact.
  std::size_t bs = static_cast<std::size_t>(cfg_.batch_size);
  std::size_t start = 0;
  while (start < order.size()) {
    std::vector<std::size_t> batch;
    std::size_t utts = 0;
    while (start < order.size() && (batch.empty() || utts < bs)) {
      batch.push_back(order[start]);
      utts += splits_.train.dialogues[order[start]].utterances.size();
      ++start;
    }
    LossBundle bundle;
    main_batch(batch, bundle);
    last_bundle_ = bundle;
    ++step_;
    emit(sink, json{{"type", "train_step"},
                    {"step", step_},
                    {"epoch", epochs_done_},
                    {"cls", bundle.cls},
                    {"iccl", bundle.iccl},
                    {"imcl", bundle.imcl},
                    {"hybrid", bundle.hybrid},
                    {"overall", bundle.overall},
                    {"iccl_skipped", bundle.iccl_skipped},
                    {"imcl_skipped", bundle.imcl_skipped}}
                  .dump());
  }
  ++epochs_done_;
  after_epoch(sink);
}

void Trainer::after_epoch(const LogSink& sink) {
  MetricsReport val = evaluate_current(splits_.val);
  if (val.wf1 > best_val_wf1_) {
    best_val_wf1_ = val.wf1;
    best_model_ = model_;
  }
  emit(sink, json{{"type", "epoch"},
                  {"epoch", epochs_done_},
                  {"val_waa", val.waa},
                  {"val_wf1", val.wf1},
                  {"best_val_wf1", best_val_wf1_}}
                .dump());
}

void Trainer::run(const LogSink& sink) {
  if (cfg_.tgan_active()) {
    while (gan_epochs_done_ < cfg_.gan_epochs) run_gan_epoch(sink);
  }
  while (epochs_done_ < cfg_.epochs) run_main_epoch(sink);
}

MetricsReport Trainer::evaluate_current(const Corpus& corpus) const {
  return evaluate_model(model_, cfg_, corpus);
}

MetricsReport Trainer::evaluate_best(const Corpus& corpus) const {
  return evaluate_model(best_model_, cfg_, corpus);
}

Checkpoint Trainer::make_checkpoint() const {
  Checkpoint ckpt;
  ckpt.config_json = config_to_json(cfg_);
  ckpt.meta = splits_.train.meta;
  ckpt.gan_epochs_done = gan_epochs_done_;
  ckpt.epochs_done = epochs_done_;
  ckpt.best_val_wf1 = best_val_wf1_;
  ckpt.rng_state = rng_.serialize();
  ckpt.adam_steps = adam_.steps();
  Model& cur = const_cast<Model&>(model_);
  Model& best = const_cast<Model&>(best_model_);
  for (const NamedParam& np : named_params(cur)) ckpt.tensors[np.name] = *np.tensor;
  for (const NamedParam& np : named_params(best))
    ckpt.tensors["best/" + np.name] = *np.tensor;
  for (const auto& [name, t] : adam_.moment1()) ckpt.tensors["adam_m/" + name] = t;
  for (const auto& [name, t] : adam_.moment2()) ckpt.tensors["adam_v/" + name] = t;
  return ckpt;
}

void Trainer::restore(const Checkpoint& ckpt) {
  TrainConfig cfg;
  model_ = model_from_checkpoint(ckpt, &cfg);
  best_model_ = model_from_checkpoint(ckpt, nullptr, /*best=*/true);
  cfg_ = cfg;
  adam_ = Adam(cfg_.lr, cfg_.weight_decay);
  adam_.steps() = ckpt.adam_steps;
  for (const auto& [name, t] : ckpt.tensors) {
    if (name.rfind("adam_m/", 0) == 0) adam_.moment1()[name.substr(7)] = t;
    else if (name.rfind("adam_v/", 0) == 0) adam_.moment2()[name.substr(7)] = t;
  }
  gan_epochs_done_ = ckpt.gan_epochs_done;
  epochs_done_ = ckpt.epochs_done;
  best_val_wf1_ = ckpt.best_val_wf1;
  rng_.deserialize(ckpt.rng_state);
  param_names_.clear();
  for (const NamedParam& np : named_params(model_)) param_names_[np.tensor] = np.name;
}

Model model_from_checkpoint(const Checkpoint& ckpt, TrainConfig* cfg_out, bool best) {
  TrainConfig cfg = config_from_json(ckpt.config_json);
  if (cfg_out) *cfg_out = cfg;
  Rng scratch(0);
  Model model = make_model(cfg, ckpt.meta, scratch);
  for (const NamedParam& np : named_params(model)) {
    std::string key = best ? "best/" + np.name : np.name;
    auto it = ckpt.tensors.find(key);
    if (it == ckpt.tensors.end())
      throw DataError("checkpoint missing tensor: " + key);
    if (!np.tensor->same_shape(it->second))
      throw ShapeError("checkpoint tensor shape mismatch: " + key);
    *np.tensor = it->second;
  }
  return model;
}

std::vector<int> predict_model(const Model& model, const TrainConfig& cfg,
                               const Corpus& corpus) {
  if (corpus.meta.dim_text != model.meta.dim_text ||
      corpus.meta.dim_audio != model.meta.dim_audio ||
      corpus.meta.dim_visual != model.meta.dim_visual ||
      corpus.meta.class_count != model.meta.class_count)
    throw ShapeError("corpus dimensions do not match the checkpointed model");
  Tape tape;
  Trainer::LeafMap leaves{tape, false, {}};
  std::vector<std::size_t> all(corpus.dialogues.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  Model& m = const_cast<Model&>(model);
  PipelineOut fw =
      forward_pipeline(tape, leaves, m, cfg, corpus, all, Mode::Eval, nullptr);
  return argmax_rows(tape.value(fw.probs));
}

MetricsReport evaluate_model(const Model& model, const TrainConfig& cfg,
                             const Corpus& corpus) {
  std::vector<int> preds = predict_model(model, cfg, corpus);
  std::vector<int> labels;
  for (const auto& d : corpus.dialogues)
    for (const auto& u : d.utterances) labels.push_back(u.label);
  return compute_metrics(preds, labels, corpus.meta.class_count);
}

}  // namespace ariign
