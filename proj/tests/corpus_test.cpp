#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <set>
#include <string>

#include "ariign/corpus.hpp"
#include "ariign/errors.hpp"
#include "ariign/rng.hpp"

using namespace ariign;

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name) : path("/tmp/ariign_test_" + name) {}
  ~TempFile() { std::remove(path.c_str()); }
};

Corpus random_corpus(std::uint64_t seed, std::size_t dialogues = 5) {
  SyntheticSpec spec;
  spec.class_count = 4;
  spec.dialogues = dialogues;
  spec.utterances_per_dialogue = 6;
  spec.dim_text = 7;
  spec.dim_audio = 5;
  spec.dim_visual = 9;
  spec.separation = 3.0;
  spec.seed = seed;
  return generate_synthetic(spec);
}

}  // namespace

TEST_CASE("save then load reproduces every value bit for bit") {
  Corpus c = random_corpus(42);
  TempFile f("roundtrip.jsonl");
  save_corpus(c, f.path);
  Corpus back = load_corpus(f.path);

  REQUIRE(back.dialogues.size() == c.dialogues.size());
  CHECK(back.meta.class_count == c.meta.class_count);
  CHECK(back.meta.class_names == c.meta.class_names);
  for (std::size_t d = 0; d < c.dialogues.size(); ++d) {
    CHECK(back.dialogues[d].dialogue_id == c.dialogues[d].dialogue_id);
    REQUIRE(back.dialogues[d].utterances.size() == c.dialogues[d].utterances.size());
    for (std::size_t u = 0; u < c.dialogues[d].utterances.size(); ++u) {
      const Utterance& a = c.dialogues[d].utterances[u];
      const Utterance& b = back.dialogues[d].utterances[u];
      CHECK(a.utt_id == b.utt_id);
      CHECK(a.speaker == b.speaker);
      CHECK(a.label == b.label);
      CHECK(a.text_feat == b.text_feat);
      CHECK(a.audio_feat == b.audio_feat);
      CHECK(a.visual_feat == b.visual_feat);
    }
  }
}

TEST_CASE("saving the same corpus twice yields identical files") {
  Corpus c = random_corpus(7);
  TempFile f1("a.jsonl"), f2("b.jsonl");
  save_corpus(c, f1.path);
  save_corpus(c, f2.path);
  std::ifstream a(f1.path), b(f2.path);
  std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
  std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
  CHECK(sa == sb);
  CHECK(!sa.empty());
}

TEST_CASE("load errors carry line numbers and the right category") {
  CHECK_THROWS_AS(load_corpus("/tmp/ariign_no_such_file.jsonl"), IoError);

  TempFile f("bad.jsonl");
  {
    std::ofstream out(f.path);
    out << R"({"schema":"ariign-corpus-v1","class_count":2,"class_names":["a","b"],)"
        << R"("dims":{"text":2,"audio":2,"visual":2}})" << '\n';
    out << "this is not json\n";
  }
  try {
    load_corpus(f.path);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }

  {
    std::ofstream out(f.path);
    out << R"({"schema":"something-else"})" << '\n';
  }
  CHECK_THROWS_AS(load_corpus(f.path), DataError);

  // label out of range
  {
    std::ofstream out(f.path);
    out << R"({"schema":"ariign-corpus-v1","class_count":2,"class_names":["a","b"],)"
        << R"("dims":{"text":1,"audio":1,"visual":1}})" << '\n';
    out << R"({"dialogue_id":"d0","utterances":[{"utt_id":"u0","speaker":"P0",)"
        << R"("label":5,"text":[0.0],"audio":[0.0],"visual":[0.0]}]})" << '\n';
  }
  CHECK_THROWS_AS(load_corpus(f.path), DataError);

  // wrong feature dimension
  {
    std::ofstream out(f.path);
    out << R"({"schema":"ariign-corpus-v1","class_count":2,"class_names":["a","b"],)"
        << R"("dims":{"text":2,"audio":1,"visual":1}})" << '\n';
    out << R"({"dialogue_id":"d0","utterances":[{"utt_id":"u0","speaker":"P0",)"
        << R"("label":0,"text":[0.0],"audio":[0.0],"visual":[0.0]}]})" << '\n';
  }
  CHECK_THROWS_AS(load_corpus(f.path), DataError);
}

TEST_CASE("validate_corpus rejects structural violations") {
  Corpus c = random_corpus(3);
  validate_corpus(c);

  Corpus nan_corpus = c;
  nan_corpus.dialogues[0].utterances[0].audio_feat[0] =
      std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(validate_corpus(nan_corpus), DataError);

  Corpus dup = c;
  dup.dialogues[0].utterances[1].utt_id = dup.dialogues[0].utterances[0].utt_id;
  CHECK_THROWS_AS(validate_corpus(dup), DataError);

  Corpus empty_dlg = c;
  empty_dlg.dialogues[0].utterances.clear();
  CHECK_THROWS_AS(validate_corpus(empty_dlg), DataError);
}

TEST_CASE("synthetic generation is deterministic in the seed") {
  Corpus a = random_corpus(123);
  Corpus b = random_corpus(123);
  Corpus c = random_corpus(124);
  REQUIRE(a.dialogues.size() == b.dialogues.size());
  CHECK(a.dialogues[0].utterances[0].text_feat == b.dialogues[0].utterances[0].text_feat);
  CHECK(a.dialogues[0].utterances[0].text_feat != c.dialogues[0].utterances[0].text_feat);
}

TEST_CASE("separation controls nearest-center oracle accuracy") {
  SyntheticSpec spec;
  spec.class_count = 4;
  spec.dialogues = 20;
  spec.utterances_per_dialogue = 10;
  spec.dim_text = 8;
  spec.dim_audio = 8;
  spec.dim_visual = 8;
  spec.seed = 9;

  spec.separation = 8.0;
  double high = nearest_center_accuracy(generate_synthetic(spec), 0);
  spec.separation = 1.0;
  double mid = nearest_center_accuracy(generate_synthetic(spec), 0);
  spec.separation = 0.0;
  double low = nearest_center_accuracy(generate_synthetic(spec), 0);

  CHECK(high == doctest::Approx(1.0));
  CHECK(high >= mid);
  CHECK(mid >= low);
  CHECK(low < 0.5);  // near 1/C with no signal
}

TEST_CASE("per-modality noise degrades only that modality") {
  SyntheticSpec spec;
  spec.class_count = 4;
  spec.dialogues = 25;
  spec.utterances_per_dialogue = 8;
  spec.dim_text = 8;
  spec.dim_audio = 8;
  spec.dim_visual = 8;
  spec.separation = 4.0;
  spec.noise = {1.0, 1.0, 8.0};
  spec.seed = 10;
  Corpus c = generate_synthetic(spec);
  CHECK(nearest_center_accuracy(c, 0) > 0.95);
  CHECK(nearest_center_accuracy(c, 2) < nearest_center_accuracy(c, 0));
}

TEST_CASE("generation rejects impossible specs") {
  SyntheticSpec spec;
  spec.class_count = 10;
  spec.dim_text = 4;  // fewer dims than classes
  CHECK_THROWS_AS(generate_synthetic(spec), ConfigError);
  SyntheticSpec neg;
  neg.separation = -1.0;
  CHECK_THROWS_AS(generate_synthetic(neg), ConfigError);
}

TEST_CASE("split partitions dialogues with floor-rule sizes") {
  for (std::size_t n : {std::size_t{3}, std::size_t{7}, std::size_t{10},
                        std::size_t{23}, std::size_t{60}}) {
    Corpus c = random_corpus(n, n);
    CorpusSplits s = split_corpus(c, {0.8, 0.1, 0.1}, 5);
    CHECK(!s.train.dialogues.empty());
    CHECK(!s.val.dialogues.empty());
    CHECK(!s.test.dialogues.empty());
    CHECK(s.train.dialogues.size() + s.val.dialogues.size() + s.test.dialogues.size() == n);

    std::set<std::string> seen;
    for (const Corpus* part : {&s.train, &s.val, &s.test})
      for (const auto& d : part->dialogues) CHECK(seen.insert(d.dialogue_id).second);
    CHECK(seen.size() == n);
  }

  Corpus c = random_corpus(1, 60);
  CorpusSplits s = split_corpus(c, {0.8, 0.1, 0.1}, 5);
  CHECK(s.train.dialogues.size() == 48);
  CHECK(s.val.dialogues.size() == 6);
  CHECK(s.test.dialogues.size() == 6);

  CorpusSplits again = split_corpus(c, {0.8, 0.1, 0.1}, 5);
  CHECK(again.train.dialogues[0].dialogue_id == s.train.dialogues[0].dialogue_id);

  CHECK_THROWS_AS(split_corpus(c, {0.5, 0.2, 0.2}, 1), ConfigError);
  CHECK_THROWS_AS(split_corpus(random_corpus(1, 2), {0.8, 0.1, 0.1}, 1), DataError);
}
