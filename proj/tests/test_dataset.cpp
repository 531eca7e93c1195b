#include <doctest.h>

#include <filesystem>
#include <map>
#include <set>

#include "aan/dataset.hpp"
#include "aan/errors.hpp"
#include "oracles.hpp"

using namespace aan;

namespace {

CorpusSpec small(std::uint64_t seed = 3) {
  CorpusSpec s = default_desk_spec(seed);
  s.n_speakers = 6;
  s.n_accents = 3;
  s.utterances_per_speaker = 9;
  s.dim = 5;
  return s;
}

std::string error_of(const CorpusSpec& s) {
  try {
    s.validate();
  } catch (const ValidationError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("generation is a pure function of the spec") {
  CorpusSpec s = default_desk_spec(7);
  CHECK(generate_corpus(s) == generate_corpus(s));
  CorpusSpec other = s;
  other.seed = 8;
  CHECK_FALSE(generate_corpus(s) == generate_corpus(other));
}

TEST_CASE("counts") {
  CorpusSpec s = small();
  s.n_speakers = 4;
  s.utterances_per_speaker = 3;
  const Corpus c = generate_corpus(s);
  CHECK(c.size() == 12);
  CHECK(c.speaker_vocab.size() == 4);
  CHECK(c.dim == 5);
  c.validate();
}

TEST_CASE("default desk corpus shape") {
  const Corpus c = generate_corpus(default_desk_spec(0));
  CHECK(c.size() == 40 * 30);
  CHECK(c.dim == 64);
  CHECK(c.gender_vocab.size() == 2);
  CHECK(c.speaker_vocab.size() == 40);
  CHECK(c.accent_vocab.size() <= 4);
}

TEST_CASE("zero noise collapses a speaker's utterances") {
  CorpusSpec s = small();
  s.noise_sigma = 0.0;
  s.attribute_strength.speaker = 1.0;
  const Corpus c = generate_corpus(s);
  std::map<std::string, Vector> first;
  for (const auto& e : c.embeddings) {
    auto [it, fresh] = first.emplace(e.speaker_id, e.vector);
    if (!fresh) CHECK((it->second.array() == e.vector.array()).all());
  }
}

TEST_CASE("speaker attributes are consistent and genders round-robin") {
  const Corpus c = generate_corpus(small());
  std::map<std::string, std::pair<std::string, std::string>> attrs;
  std::map<std::string, int> per_gender;
  for (const auto& e : c.embeddings) {
    auto [it, fresh] = attrs.emplace(e.speaker_id, std::pair{e.gender, e.accent});
    if (fresh) ++per_gender[e.gender];
    CHECK(it->second == std::pair{e.gender, e.accent});
  }
  CHECK(per_gender.size() == 2);
  for (const auto& [g, n] : per_gender) CHECK(n == 3);
}

TEST_CASE("vocabularies are lexicographic and contiguous") {
  const Vocab v = Vocab::from_labels({"m", "f", "m", "acc"});
  REQUIRE(v.size() == 3);
  CHECK(v.label(0) == "acc");
  CHECK(v.label(1) == "f");
  CHECK(v.index("m") == 2);
  CHECK_FALSE(v.find("x").has_value());
  CHECK_THROWS_AS(v.index("x"), ValidationError);
}

TEST_CASE("invalid specs name the offending field") {
  CorpusSpec s = small();
  s.n_speakers = 0;
  CHECK(error_of(s).find("n_speakers") != std::string::npos);
  s = small();
  s.dim = 0;
  CHECK(error_of(s).find("dim") != std::string::npos);
  s = small();
  s.noise_sigma = NAN;
  CHECK(error_of(s).find("noise_sigma") != std::string::npos);
  s = small();
  s.attribute_strength.accent = -1;
  CHECK(error_of(s).find("accent") != std::string::npos);
  s = small();
  s.n_speakers = 1;
  CHECK(error_of(s).find("n_speakers") != std::string::npos);
  CHECK_THROWS_AS(generate_corpus(s), ValidationError);
}

TEST_CASE("split sizes") {
  const Corpus c = generate_corpus(default_desk_spec(1));
  const CorpusSplit sp = split_corpus(c, 10);
  CHECK(sp.train.size() == 40 * 10);
  CHECK(sp.valid.size() == 40 * 10);
  CHECK(sp.test.size() == 40 * 10);
  CHECK(sp.train.speaker_vocab == c.speaker_vocab);
  CHECK(sp.valid.split_tag == SplitTag::Valid);

  // last 10 by utterance id are valid, the 10 before are test
  for (const auto& e : sp.valid.embeddings) CHECK(e.utterance_id.substr(e.utterance_id.size() - 3) >= "020");
  for (const auto& e : sp.test.embeddings) {
    const auto tail = e.utterance_id.substr(e.utterance_id.size() - 3);
    CHECK(tail >= "010");
    CHECK(tail < "020");
  }
}

TEST_CASE("split with no holdout") {
  const Corpus c = generate_corpus(small());
  const CorpusSplit sp = split_corpus(c, 0);
  CHECK(sp.valid.empty());
  CHECK(sp.test.empty());
  CHECK(sp.train.embeddings == c.embeddings);
}

TEST_CASE("split needs enough utterances and names the speaker") {
  CorpusSpec s = small();
  s.utterances_per_speaker = 5;
  try {
    split_corpus(generate_corpus(s), 10);
    FAIL("expected an error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("spk") != std::string::npos);
  }
}

TEST_CASE("split partitions the corpus") {
  const Corpus c = generate_corpus(small());
  const CorpusSplit sp = split_corpus(c, 2);
  std::multiset<std::string> all, parts;
  for (const auto& e : c.embeddings) all.insert(e.utterance_id);
  for (const Corpus* p : {&sp.train, &sp.valid, &sp.test})
    for (const auto& e : p->embeddings) parts.insert(e.utterance_id);
  CHECK(all == parts);
  CHECK(sp.train.size() + sp.valid.size() + sp.test.size() == c.size());
}

TEST_CASE("enroll/trial split") {
  const Corpus c = generate_corpus(small());
  auto [enroll, trial] = split_enroll_trial(c, 4);
  CHECK(enroll.size() == 6 * 4);
  CHECK(trial.size() == 6 * 5);
}

TEST_CASE("csv round trip is bit exact") {
  const Corpus c = generate_corpus(small());
  CHECK(corpus_from_csv(corpus_to_csv(c)) == c);

  const auto path = std::filesystem::temp_directory_path() / "aan_test_roundtrip.csv";
  write_corpus(c, path);
  CHECK(read_corpus(path) == c);
  std::filesystem::remove(path);
}

TEST_CASE("csv errors") {
  SUBCASE("row length mismatch carries a line number") {
    const std::string text = "utterance_id,speaker_id,gender,accent,v0,v1\nu1,s1,f,a,1,2\nu2,s1,f,a,1\n";
    try {
      corpus_from_csv(text);
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()).find("3") != std::string::npos);
    }
  }
  SUBCASE("header only") {
    try {
      corpus_from_csv("utterance_id,speaker_id,gender,accent,v0\n");
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(std::string(e.what()).find("empty corpus") != std::string::npos);
    }
  }
  SUBCASE("bad number") {
    CHECK_THROWS_AS(corpus_from_csv("utterance_id,speaker_id,gender,accent,v0\nu1,s1,f,a,x\n"), ParseError);
  }
  SUBCASE("bad header") {
    CHECK_THROWS_AS(corpus_from_csv("id,speaker_id,gender,accent,v0\nu1,s1,f,a,1\n"), ParseError);
  }
  SUBCASE("speaker with two genders") {
    CHECK_THROWS_AS(
        corpus_from_csv("utterance_id,speaker_id,gender,accent,v0\nu1,s1,f,a,1\nu2,s1,m,a,1\n"),
        ParseError);
  }
}

TEST_CASE("separability knob: nearest class mean is perfect at low noise") {
  CorpusSpec s = default_desk_spec(5);
  s.noise_sigma = 0.05;
  s.attribute_strength.speaker = 1.0;
  const CorpusSplit sp = split_corpus(generate_corpus(s), 10);
  CHECK(oracle::nearest_mean_accuracy(sp.train.matrix(), sp.train.speaker_labels(), sp.test.matrix(),
                                      sp.test.speaker_labels()) == 1.0);
}
