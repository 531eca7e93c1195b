#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "aan/dataset.hpp"
#include "aan/neural.hpp"

namespace aan {

// Architecture descriptor. The encoder is input->hidden->latent (tanh), the
// decoder latent->hidden (tanh)->input (linear), and every adversarial branch
// latent->branch_hidden (ReLU)->classes.
struct AanDims {
  std::size_t input = 64;
  std::size_t hidden = 128;
  std::size_t latent = 64;
  std::size_t branch_hidden = 32;
  std::size_t gender_classes = 2;
  std::size_t accent_classes = 4;
  std::size_t speaker_classes = 40;

  // 512-wide autoencoder, 128-wide branches, (2, 30, 1251) classes.
  static AanDims full_scale();
  // Input and class counts taken from a corpus; widths keep their defaults.
  static AanDims for_corpus(const Corpus& corpus);

  void validate() const;
  bool operator==(const AanDims&) const = default;
};

struct Branch {
  DenseLayer hidden;
  DenseLayer logits;
};

struct BranchGrads {
  DenseGrads hidden;
  DenseGrads logits;
};

enum class Attribute { Gender, Accent, Speaker };

struct AanModel {
  AanDims dims;
  double lambda = 8.0;
  std::vector<DenseLayer> encoder;
  std::vector<DenseLayer> decoder;
  Branch gender_head;
  Branch accent_head;
  Branch speaker_head;

  const Branch& head(Attribute a) const;
  Branch& head(Attribute a);

  // Declaration order: encoder, decoder, gender, accent, speaker; each layer
  // contributes its weights then its bias.
  ParamSpans parameters();
  std::size_t parameter_count() const;
  void validate() const;
};

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases.
AanModel build_aan(const AanDims& dims, double lambda, std::uint64_t seed);

// Same topology with every weight drawn uniform(-bound, bound) and zero biases.
AanModel build_aan_uniform(const AanDims& dims, double lambda, double bound, std::uint64_t seed);

struct AanOutput {
  BatchTensor reconstruction;
  BatchTensor latent;
  BatchTensor gender_logits;
  BatchTensor accent_logits;
  BatchTensor speaker_logits;
};

AanOutput aan_forward(const AanModel& model, const BatchTensor& x);

struct LossBreakdown {
  double l_au = 0.0;
  double l_gender = 0.0;
  double l_accent = 0.0;
  double l_speaker = 0.0;

  double l_z() const { return l_gender + l_accent + l_speaker; }
  double total_reported() const { return l_au + l_z(); }
  // l_au - lambda * l_z, what the encoder descends.
  double encoder_objective(double lambda) const { return l_au - lambda * l_z(); }
};

struct AanGrads {
  std::vector<DenseGrads> encoder;  // d(l_au - lambda * l_z)/d theta_e
  std::vector<DenseGrads> decoder;  // d l_au / d theta_d
  BranchGrads gender_head;          // d l_gender / d theta_g
  BranchGrads accent_head;
  BranchGrads speaker_head;

  // Same order as AanModel::parameters().
  GradSpans spans() const;
};

struct LabeledBatch {
  BatchTensor x;
  std::vector<int> gender;
  std::vector<int> accent;
  std::vector<int> speaker;

  static LabeledBatch from_corpus(const Corpus& corpus);
  LabeledBatch rows(const std::vector<std::size_t>& index) const;
  std::size_t size() const { return static_cast<std::size_t>(x.rows()); }
};

LossBreakdown aan_loss(const AanModel& model, const LabeledBatch& batch);

struct LossAndGrads {
  LossBreakdown loss;
  AanGrads grads;
};

// Heads receive the gradient of their own cross-entropy, the decoder that of
// the reconstruction MSE, and the encoder the reconstruction gradient plus the
// branch gradients passed back through the reversal layer (-lambda).
LossAndGrads aan_loss_and_grads(const AanModel& model, const LabeledBatch& batch);

// ---------------------------------------------------------------------------
// Training

enum class OptimizerKind { Adam, Sgd };

// Which epoch's parameters train() returns.
enum class Selection { BestValidLoss, LastEpoch };

struct TrainConfig {
  double lambda = 8.0;
  std::size_t epochs = 200;
  std::size_t batch_size = 32;
  OptimizerKind optimizer = OptimizerKind::Adam;
  AdamConfig adam;
  double sgd_lr = 0.01;
  std::uint64_t seed = 0;
  bool shuffle = true;
  Selection selection = Selection::BestValidLoss;

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 0 is the untrained model
  LossBreakdown train;
  LossBreakdown valid;
  double valid_gender_acc = 0.0;
  double valid_accent_acc = 0.0;
  double valid_speaker_acc = 0.0;
};

struct TrainingHistory {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  bool diverged = false;
};

struct TrainResult {
  AanModel model;
  TrainingHistory history;
};

// Minibatch training of the min-max objective. Returns the parameters from the
// epoch with the lowest validation l_au. On divergence, stops and returns the
// best checkpoint so far with history.diverged set.
TrainResult train(AanModel model, const Corpus& train_corpus, const Corpus& valid_corpus,
                  const TrainConfig& config);

// Top-1 accuracy of a head on a batch.
double head_accuracy(const BatchTensor& logits, const std::vector<int>& labels);

// One row per epoch: epoch, train/valid loss terms, valid head accuracies.
void write_history_csv(const TrainingHistory& history, const std::filesystem::path& path);
std::string history_to_csv(const TrainingHistory& history);

// ---------------------------------------------------------------------------
// Checkpoints (layout in docs/checkpoint_format.md)

inline constexpr char kCheckpointMagic[4] = {'A', 'A', 'N', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string serialize_model(const AanModel& model);
AanModel deserialize_model(std::string_view bytes);
void save_model(const AanModel& model, const std::filesystem::path& path);
AanModel load_model(const std::filesystem::path& path);

}  // namespace aan
