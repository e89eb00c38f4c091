#pragma once

// Dialogue data model, JSON-Lines corpus I/O, and the synthetic corpus
// generator used for desk-scale experiments. All objects are immutable
// after construction; loading and generation are pure in (path|spec, seed).

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "ariign/rng.hpp"

namespace ariign {

inline constexpr const char* kCorpusSchema = "ariign-corpus-v1";

struct Utterance {
  std::string utt_id;
  std::string speaker;
  int label = 0;
  std::vector<double> text_feat;
  std::vector<double> audio_feat;
  std::vector<double> visual_feat;
};

struct Dialogue {
  std::string dialogue_id;
  std::vector<Utterance> utterances;  // speaking order
};

struct CorpusMeta {
  int class_count = 0;
  std::vector<std::string> class_names;
  std::size_t dim_text = 100;
  std::size_t dim_audio = 100;
  std::size_t dim_visual = 512;
};

struct Corpus {
  CorpusMeta meta;
  std::vector<Dialogue> dialogues;

  std::size_t total_utterances() const {
    std::size_t n = 0;
    for (const auto& d : dialogues) n += d.utterances.size();
    return n;
  }
};

Corpus load_corpus(const std::string& path);
void save_corpus(const Corpus& corpus, const std::string& path);

// Validates invariants (finite features, dims, labels, unique utt ids);
// throws DataError on violation. Called by load_corpus.
void validate_corpus(const Corpus& corpus);

struct SyntheticSpec {
  int class_count = 6;
  std::size_t dialogues = 30;
  std::size_t utterances_per_dialogue = 10;
  std::size_t speakers_per_dialogue = 2;
  std::size_t dim_text = 100;
  std::size_t dim_audio = 100;
  std::size_t dim_visual = 512;
  double separation = 8.0;
  // Per-modality noise scale; raising one makes that channel less
  // informative (used by the modality-subset experiments).
  std::array<double, 3> noise = {1.0, 1.0, 1.0};  // text, audio, visual
  std::uint64_t seed = 0;
};

// Class centers are scaled basis vectors passed through a per-modality
// signed permutation, so centers are mutually separation*sqrt(2) apart
// within each modality and modalities are heterogeneous by construction.
Corpus generate_synthetic(const SyntheticSpec& spec);

struct SplitRatios {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
};

struct CorpusSplits {
  Corpus train;
  Corpus val;
  Corpus test;
};

// Whole-dialogue split. floor(ratio*N) per part, remainders to train then
// val then test, every part forced nonempty when N >= 3.
CorpusSplits split_corpus(const Corpus& corpus, const SplitRatios& ratios,
                          std::uint64_t seed);

// Nearest-class-center assignment on one raw feature channel; the oracle
// classifier used to sanity-check synthetic corpora.
// modality: 0=text, 1=audio, 2=visual.
double nearest_center_accuracy(const Corpus& corpus, int modality);

}  // namespace ariign
