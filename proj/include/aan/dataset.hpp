#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace aan {

using Vector = Eigen::VectorXd;

// Ordered label vocabulary. Indices are contiguous from 0 and follow
// lexicographic label order.
class Vocab {
 public:
  Vocab() = default;
  // Sorts and deduplicates the given labels.
  static Vocab from_labels(std::vector<std::string> labels);

  std::size_t size() const { return labels_.size(); }
  bool empty() const { return labels_.empty(); }
  const std::string& label(std::size_t index) const { return labels_.at(index); }
  const std::vector<std::string>& labels() const { return labels_; }
  std::optional<int> find(std::string_view label) const;
  // Throws ValidationError if the label is unknown.
  int index(std::string_view label) const;

  bool operator==(const Vocab&) const = default;

 private:
  std::vector<std::string> labels_;
};

struct Embedding {
  std::string utterance_id;
  std::string speaker_id;
  std::string gender;
  std::string accent;
  Vector vector;

  bool operator==(const Embedding& other) const;
};

enum class SplitTag { Train, Valid, Test, Unsplit };

std::string_view to_string(SplitTag tag);

struct Corpus {
  std::vector<Embedding> embeddings;
  std::size_t dim = 0;
  Vocab speaker_vocab;
  Vocab gender_vocab;
  Vocab accent_vocab;
  SplitTag split_tag = SplitTag::Unsplit;

  std::size_t size() const { return embeddings.size(); }
  bool empty() const { return embeddings.empty(); }

  // N x D matrix of all vectors, rows in corpus order.
  Eigen::MatrixXd matrix() const;
  std::vector<int> speaker_labels() const;
  std::vector<int> gender_labels() const;
  std::vector<int> accent_labels() const;

  // Checks every corpus invariant except N >= 1 (splits may be empty).
  // Throws ValidationError.
  void validate() const;

  bool operator==(const Corpus&) const = default;
};

// Builds vocabularies from the labels present in `embeddings`.
Corpus make_corpus(std::vector<Embedding> embeddings, std::size_t dim,
                   SplitTag tag = SplitTag::Unsplit);

struct AttributeStrength {
  double speaker = 1.0;
  double gender = 1.0;
  double accent = 1.0;
};

// Parameters of the synthetic labeled embedding generator.
struct CorpusSpec {
  std::size_t n_speakers = 40;
  std::size_t n_genders = 2;
  std::size_t n_accents = 4;
  std::size_t utterances_per_speaker = 30;
  std::size_t dim = 64;
  AttributeStrength attribute_strength;
  double noise_sigma = 0.5;
  std::uint64_t seed = 0;

  void validate() const;
};

// Desk-scale defaults used throughout the tools and the acceptance suite.
CorpusSpec default_desk_spec(std::uint64_t seed);

// utterance vector = gender direction + accent direction + speaker offset
// + isotropic noise. Pure function of the spec.
Corpus generate_corpus(const CorpusSpec& spec);

struct CorpusSplit {
  Corpus train;
  Corpus valid;
  Corpus test;
};

// Per speaker, ordered by utterance_id: the last n go to valid, the n before
// those to test, the rest to train. Vocabularies are copied unchanged.
CorpusSplit split_corpus(const Corpus& corpus, std::size_t n_heldout_per_speaker);

// Per speaker, the first n utterances (by utterance_id) become the enrollment
// side and the remainder the trial side.
std::pair<Corpus, Corpus> split_enroll_trial(const Corpus& corpus,
                                             std::size_t n_enroll_per_speaker);

// CSV with header utterance_id,speaker_id,gender,accent,v0..v{D-1}; values
// carry 17 significant digits so doubles round-trip exactly.
void write_corpus(const Corpus& corpus, const std::filesystem::path& path);
std::string corpus_to_csv(const Corpus& corpus);
Corpus read_corpus(const std::filesystem::path& path, SplitTag tag = SplitTag::Unsplit);
Corpus corpus_from_csv(std::string_view text, SplitTag tag = SplitTag::Unsplit);

}  // namespace aan
