#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>

#include "aan/errors.hpp"
#include "aan/model.hpp"

namespace aan {

void TrainConfig::validate() const {
  if (!std::isfinite(lambda) || lambda < 0.0)
    throw ValidationError("lambda must be finite and nonnegative");
  if (epochs < 1) throw ValidationError("epochs must be >= 1");
  if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
  if (optimizer == OptimizerKind::Adam) adam.validate();
  if (!std::isfinite(sgd_lr) || sgd_lr < 0.0)
    throw ValidationError("sgd_lr must be finite and nonnegative");
}

double head_accuracy(const BatchTensor& logits, const std::vector<int>& labels) {
  if (labels.empty()) return 0.0;
  std::size_t hits = 0;
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    Eigen::Index arg = 0;
    logits.row(r).maxCoeff(&arg);
    hits += arg == labels[static_cast<std::size_t>(r)];
  }
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

namespace {

void check_compatible(const AanModel& model, const Corpus& c, const char* which) {
  if (c.empty()) return;
  if (c.dim != model.dims.input)
    throw ShapeError(std::string(which) + " corpus has D=" + std::to_string(c.dim) +
                     ", model expects " + std::to_string(model.dims.input));
  if (c.gender_vocab.size() > model.dims.gender_classes ||
      c.accent_vocab.size() > model.dims.accent_classes ||
      c.speaker_vocab.size() > model.dims.speaker_classes)
    throw ValidationError(std::string(which) + " corpus has more classes than the model heads");
}

struct Evaluation {
  LossBreakdown loss;
  double gender_acc = 0.0, accent_acc = 0.0, speaker_acc = 0.0;
};

Evaluation evaluate(const AanModel& model, const LabeledBatch& batch) {
  Evaluation e;
  if (batch.size() == 0) return e;
  e.loss = aan_loss(model, batch);
  const AanOutput out = aan_forward(model, batch.x);
  e.gender_acc = head_accuracy(out.gender_logits, batch.gender);
  e.accent_acc = head_accuracy(out.accent_logits, batch.accent);
  e.speaker_acc = head_accuracy(out.speaker_logits, batch.speaker);
  return e;
}

}  // namespace

TrainResult train(AanModel model, const Corpus& train_corpus, const Corpus& valid_corpus,
                  const TrainConfig& config) {
  config.validate();
  model.validate();
  if (train_corpus.empty()) throw ValidationError("training corpus is empty");
  check_compatible(model, train_corpus, "training");
  check_compatible(model, valid_corpus, "validation");
  model.lambda = config.lambda;

  const LabeledBatch train_set = LabeledBatch::from_corpus(train_corpus);
  const LabeledBatch valid_set = LabeledBatch::from_corpus(valid_corpus);
  const bool has_valid = valid_set.size() > 0;

  TrainResult result{model, {}};
  auto record = [&](std::size_t epoch) {
    EpochRecord r;
    r.epoch = epoch;
    r.train = evaluate(model, train_set).loss;
    const Evaluation v = evaluate(model, has_valid ? valid_set : train_set);
    r.valid = v.loss;
    r.valid_gender_acc = v.gender_acc;
    r.valid_accent_acc = v.accent_acc;
    r.valid_speaker_acc = v.speaker_acc;
    result.history.epochs.push_back(r);
    const auto& best = result.history.epochs[result.history.best_epoch];
    if (epoch == 0 || config.selection == Selection::LastEpoch || r.valid.l_au < best.valid.l_au) {
      result.history.best_epoch = result.history.epochs.size() - 1;
      result.model = model;
    }
  };

  try {
    record(0);
  } catch (const DivergenceError&) {
    result.history.diverged = true;
    return result;
  }

  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(train_set.size());
  AdamState adam_state;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (config.shuffle) std::shuffle(order.begin(), order.end(), rng);
    try {
      for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
        const std::size_t stop = std::min(order.size(), start + config.batch_size);
        const LabeledBatch mb = train_set.rows(
            std::vector<std::size_t>(order.begin() + static_cast<std::ptrdiff_t>(start),
                                     order.begin() + static_cast<std::ptrdiff_t>(stop)));
        const LossAndGrads lg = aan_loss_and_grads(model, mb);
        const ParamSpans params = model.parameters();
        const GradSpans grads = lg.grads.spans();
        if (config.optimizer == OptimizerKind::Adam)
          adam_step(params, grads, adam_state, config.adam);
        else
          sgd_step(params, grads, config.sgd_lr);
      }
      record(epoch);
    } catch (const DivergenceError&) {
      result.history.diverged = true;
      break;
    }
  }
  return result;
}

std::string history_to_csv(const TrainingHistory& history) {
  std::string out =
      "epoch,train_l_au,train_l_gender,train_l_accent,train_l_speaker,"
      "valid_l_au,valid_l_gender,valid_l_accent,valid_l_speaker,"
      "valid_gender_acc,valid_accent_acc,valid_speaker_acc\n";
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, ",%.17g", v);
    out += buf;
  };
  for (const auto& r : history.epochs) {
    out += std::to_string(r.epoch);
    for (const LossBreakdown* l : {&r.train, &r.valid}) {
      num(l->l_au);
      num(l->l_gender);
      num(l->l_accent);
      num(l->l_speaker);
    }
    num(r.valid_gender_acc);
    num(r.valid_accent_acc);
    num(r.valid_speaker_acc);
    out += '\n';
  }
  return out;
}

void write_history_csv(const TrainingHistory& history, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open '" + path.string() + "' for writing");
  f << history_to_csv(history);
}

}  // namespace aan
