#include "ariign/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "ariign/errors.hpp"

namespace ariign {

using nlohmann::json;

namespace {

std::vector<double> read_vec(const json& j, std::size_t expected_dim,
                             const char* field, std::size_t line_no) {
  if (!j.is_array())
    throw DataError("line " + std::to_string(line_no) + ": '" + field +
                    "' must be an array");
  std::vector<double> v;
  v.reserve(j.size());
  for (const auto& x : j) v.push_back(x.get<double>());
  if (v.size() != expected_dim)
    throw DataError("line " + std::to_string(line_no) + ": '" + field + "' has length " +
                    std::to_string(v.size()) + ", expected " +
                    std::to_string(expected_dim));
  for (double x : v)
    if (!std::isfinite(x))
      throw DataError("line " + std::to_string(line_no) + ": '" + field +
                      "' contains a non-finite value");
  return v;
}

json vec_to_json(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(x);
  return a;
}

}  // namespace

Corpus load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open corpus file: " + path);
  std::string line;
  std::size_t line_no = 0;

  Corpus corpus;
  if (!std::getline(in, line)) throw DataError("empty corpus file: " + path);
  ++line_no;
  json header;
  try {
    header = json::parse(line);
  } catch (const json::exception& e) {
    throw DataError("line 1: header parse error: " + std::string(e.what()));
  }
  if (!header.is_object() || header.value("schema", "") != kCorpusSchema)
    throw DataError("line 1: expected header with schema '" +
                    std::string(kCorpusSchema) + "'");
  try {
    corpus.meta.class_count = header.at("class_count").get<int>();
    corpus.meta.class_names = header.at("class_names").get<std::vector<std::string>>();
    const json& dims = header.at("dims");
    corpus.meta.dim_text = dims.at("text").get<std::size_t>();
    corpus.meta.dim_audio = dims.at("audio").get<std::size_t>();
    corpus.meta.dim_visual = dims.at("visual").get<std::size_t>();
  } catch (const json::exception& e) {
    throw DataError("line 1: malformed header: " + std::string(e.what()));
  }

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json jd;
    try {
      jd = json::parse(line);
    } catch (const json::exception& e) {
      throw DataError("line " + std::to_string(line_no) + ": parse error: " + e.what());
    }
    Dialogue d;
    try {
      d.dialogue_id = jd.at("dialogue_id").get<std::string>();
    } catch (const json::exception&) {
      throw DataError("line " + std::to_string(line_no) + ": missing dialogue_id");
    }
    if (!jd.contains("utterances") || !jd["utterances"].is_array())
      throw DataError("line " + std::to_string(line_no) + ": missing utterances array");
    for (const auto& ju : jd["utterances"]) {
      Utterance u;
      try {
        u.utt_id = ju.at("utt_id").get<std::string>();
        u.speaker = ju.at("speaker").get<std::string>();
        u.label = ju.at("label").get<int>();
      } catch (const json::exception& e) {
        throw DataError("line " + std::to_string(line_no) + ": malformed utterance: " +
                        e.what());
      }
      if (u.label < 0 || u.label >= corpus.meta.class_count)
        throw DataError("line " + std::to_string(line_no) + ": label " +
                        std::to_string(u.label) + " out of range [0, " +
                        std::to_string(corpus.meta.class_count) + ")");
      u.text_feat = read_vec(ju.at("text"), corpus.meta.dim_text, "text", line_no);
      u.audio_feat = read_vec(ju.at("audio"), corpus.meta.dim_audio, "audio", line_no);
      u.visual_feat = read_vec(ju.at("visual"), corpus.meta.dim_visual, "visual", line_no);
      d.utterances.push_back(std::move(u));
    }
    corpus.dialogues.push_back(std::move(d));
  }
  validate_corpus(corpus);
  return corpus;
}

void save_corpus(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write corpus file: " + path);
  json header = {
      {"schema", kCorpusSchema},
      {"class_count", corpus.meta.class_count},
      {"class_names", corpus.meta.class_names},
      {"dims",
       {{"text", corpus.meta.dim_text},
        {"audio", corpus.meta.dim_audio},
        {"visual", corpus.meta.dim_visual}}},
  };
  out << header.dump() << '\n';
  for (const auto& d : corpus.dialogues) {
    json jd = {{"dialogue_id", d.dialogue_id}, {"utterances", json::array()}};
    for (const auto& u : d.utterances) {
      jd["utterances"].push_back({
          {"utt_id", u.utt_id},
          {"speaker", u.speaker},
          {"label", u.label},
          {"text", vec_to_json(u.text_feat)},
          {"audio", vec_to_json(u.audio_feat)},
          {"visual", vec_to_json(u.visual_feat)},
      });
    }
    out << jd.dump() << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

void validate_corpus(const Corpus& corpus) {
  const CorpusMeta& m = corpus.meta;
  if (m.class_count <= 0) throw DataError("class_count must be positive");
  if (m.class_names.size() != static_cast<std::size_t>(m.class_count))
    throw DataError("class_names length must equal class_count");
  if (m.dim_text == 0 || m.dim_audio == 0 || m.dim_visual == 0)
    throw DataError("feature dims must be positive");
  for (const auto& d : corpus.dialogues) {
    if (d.utterances.empty())
      throw DataError("dialogue '" + d.dialogue_id + "' has no utterances");
    std::set<std::string> ids;
    for (const auto& u : d.utterances) {
      if (!ids.insert(u.utt_id).second)
        throw DataError("dialogue '" + d.dialogue_id + "': duplicate utt_id '" +
                        u.utt_id + "'");
      if (u.label < 0 || u.label >= m.class_count)
        throw DataError("utterance '" + u.utt_id + "': label out of range");
      auto check = [&](const std::vector<double>& v, std::size_t dim, const char* name) {
        if (v.size() != dim)
          throw DataError("utterance '" + u.utt_id + "': " + name + " dim mismatch");
        for (double x : v)
          if (!std::isfinite(x))
            throw DataError("utterance '" + u.utt_id + "': non-finite " + name);
      };
      check(u.text_feat, m.dim_text, "text");
      check(u.audio_feat, m.dim_audio, "audio");
      check(u.visual_feat, m.dim_visual, "visual");
    }
  }
}

namespace {

// Signed permutation: orthogonal, cheap, distinct per modality.
struct SignedPerm {
  std::vector<std::size_t> perm;
  std::vector<double> sign;

  static SignedPerm random(std::size_t dim, Rng& rng) {
    SignedPerm p;
    p.perm.resize(dim);
    std::iota(p.perm.begin(), p.perm.end(), std::size_t{0});
    rng.shuffle(p.perm);
    p.sign.resize(dim);
    for (auto& s : p.sign) s = rng.uniform() < 0.5 ? -1.0 : 1.0;
    return p;
  }

  std::vector<double> apply(const std::vector<double>& x) const {
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[perm[i]] = sign[i] * x[i];
    return y;
  }
};

}  // namespace

Corpus generate_synthetic(const SyntheticSpec& spec) {
  if (spec.class_count < 1 || spec.dialogues < 1 || spec.utterances_per_dialogue < 1 ||
      spec.speakers_per_dialogue < 1)
    throw ConfigError("generate_synthetic: all counts must be >= 1");
  if (spec.separation < 0.0) throw ConfigError("generate_synthetic: separation >= 0");
  const std::size_t dims[3] = {spec.dim_text, spec.dim_audio, spec.dim_visual};
  for (std::size_t d : dims)
    if (d < static_cast<std::size_t>(spec.class_count))
      throw ConfigError("generate_synthetic: every dim must be >= class_count");

  Rng rng(spec.seed);
  Corpus corpus;
  corpus.meta.class_count = spec.class_count;
  for (int c = 0; c < spec.class_count; ++c)
    corpus.meta.class_names.push_back("class_" + std::to_string(c));
  corpus.meta.dim_text = spec.dim_text;
  corpus.meta.dim_audio = spec.dim_audio;
  corpus.meta.dim_visual = spec.dim_visual;

  SignedPerm maps[3] = {SignedPerm::random(dims[0], rng),
                        SignedPerm::random(dims[1], rng),
                        SignedPerm::random(dims[2], rng)};

  for (std::size_t di = 0; di < spec.dialogues; ++di) {
    Dialogue dlg;
    dlg.dialogue_id = "dlg_" + std::to_string(di);
    for (std::size_t ui = 0; ui < spec.utterances_per_dialogue; ++ui) {
      Utterance u;
      u.utt_id = dlg.dialogue_id + "_u" + std::to_string(ui);
      u.speaker = "P" + std::to_string(rng.below(spec.speakers_per_dialogue));
      u.label = static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.class_count)));
      for (int m = 0; m < 3; ++m) {
        std::vector<double> x(dims[m]);
        for (std::size_t i = 0; i < x.size(); ++i) x[i] = spec.noise[m] * rng.normal();
        // Class center: separation * e_label, then the modality map.
        x[static_cast<std::size_t>(u.label)] += spec.separation;
        std::vector<double> y = maps[m].apply(x);
        if (m == 0) u.text_feat = std::move(y);
        else if (m == 1) u.audio_feat = std::move(y);
        else u.visual_feat = std::move(y);
      }
      dlg.utterances.push_back(std::move(u));
    }
    corpus.dialogues.push_back(std::move(dlg));
  }
  return corpus;
}

CorpusSplits split_corpus(const Corpus& corpus, const SplitRatios& ratios,
                          std::uint64_t seed) {
  if (ratios.train <= 0.0 || ratios.val <= 0.0 || ratios.test <= 0.0)
    throw ConfigError("split ratios must be positive");
  double sum = ratios.train + ratios.val + ratios.test;
  if (std::fabs(sum - 1.0) > 1e-9) throw ConfigError("split ratios must sum to 1");
  std::size_t n = corpus.dialogues.size();
  if (n < 3) throw DataError("split needs at least 3 dialogues, got " + std::to_string(n));

  std::size_t n_train = static_cast<std::size_t>(ratios.train * static_cast<double>(n));
  std::size_t n_val = static_cast<std::size_t>(ratios.val * static_cast<double>(n));
  std::size_t n_test = static_cast<std::size_t>(ratios.test * static_cast<double>(n));
  // Remainders to train, then val, then test.
  std::size_t rem = n - (n_train + n_val + n_test);
  while (rem > 0) {
    if (rem > 0) { ++n_train; --rem; }
    if (rem > 0) { ++n_val; --rem; }
    if (rem > 0) { ++n_test; --rem; }
  }
  // Force each part nonempty (N >= 3 guarantees room).
  auto donate = [&](std::size_t& to) {
    if (to > 0) return;
    if (n_train > 1) { --n_train; ++to; }
    else if (n_val > 1) { --n_val; ++to; }
    else { --n_test; ++to; }
  };
  donate(n_val);
  donate(n_test);
  donate(n_train);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(order);

  CorpusSplits out;
  out.train.meta = out.val.meta = out.test.meta = corpus.meta;
  for (std::size_t i = 0; i < n; ++i) {
    const Dialogue& d = corpus.dialogues[order[i]];
    if (i < n_train) out.train.dialogues.push_back(d);
    else if (i < n_train + n_val) out.val.dialogues.push_back(d);
    else out.test.dialogues.push_back(d);
  }
  return out;
}

double nearest_center_accuracy(const Corpus& corpus, int modality) {
  const std::size_t dim = modality == 0   ? corpus.meta.dim_text
                          : modality == 1 ? corpus.meta.dim_audio
                                          : corpus.meta.dim_visual;
  auto feat = [&](const Utterance& u) -> const std::vector<double>& {
    return modality == 0 ? u.text_feat : modality == 1 ? u.audio_feat : u.visual_feat;
  };
  int c_count = corpus.meta.class_count;
  std::vector<std::vector<double>> centers(c_count, std::vector<double>(dim, 0.0));
  std::vector<std::size_t> counts(c_count, 0);
  for (const auto& d : corpus.dialogues)
    for (const auto& u : d.utterances) {
      const auto& f = feat(u);
      for (std::size_t i = 0; i < dim; ++i) centers[u.label][i] += f[i];
      ++counts[u.label];
    }
  for (int c = 0; c < c_count; ++c)
    if (counts[c] > 0)
      for (auto& x : centers[c]) x /= static_cast<double>(counts[c]);

  std::size_t correct = 0, total = 0;
  for (const auto& d : corpus.dialogues)
    for (const auto& u : d.utterances) {
      const auto& f = feat(u);
      int best = -1;
      double best_d2 = std::numeric_limits<double>::max();
      for (int c = 0; c < c_count; ++c) {
        if (counts[c] == 0) continue;
        double d2 = 0.0;
        for (std::size_t i = 0; i < dim; ++i) {
          double t = f[i] - centers[c][i];
          d2 += t * t;
        }
        if (d2 < best_d2) { best_d2 = d2; best = c; }
      }
      correct += best == u.label ? 1 : 0;
      ++total;
    }
  return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
}

}  // namespace ariign
