#include "aan/asv_eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>

#include "aan/errors.hpp"
#include "aan/seed.hpp"

namespace aan {

// ---------------------------------------------------------------------------
// Trials

std::vector<Trial> make_trials(const Corpus& enroll, const Corpus& trial,
                               std::size_t n_nontarget_per_target, std::uint64_t seed) {
  // speaker -> gender, restricted to speakers with enrollment data
  std::map<std::string, std::string> enrolled;
  for (const auto& e : enroll.embeddings) enrolled.emplace(e.speaker_id, e.gender);
  std::map<std::string, std::vector<std::string>> by_gender;
  for (const auto& [spk, gen] : enrolled) by_gender[gen].push_back(spk);
  for (const auto& [gen, spks] : by_gender)
    if (spks.size() < 2)
      throw ValidationError("gender '" + gen + "' has " + std::to_string(spks.size()) +
                            " enrolled speaker(s); nontarget trials need at least 2");

  std::mt19937_64 rng(seed);
  std::vector<Trial> trials;
  for (const auto& e : trial.embeddings) {
    auto it = enrolled.find(e.speaker_id);
    if (it == enrolled.end())
      throw ValidationError("trial speaker '" + e.speaker_id + "' has no enrollment utterances");
    const std::string& gender = it->second;
    trials.push_back({e.speaker_id, e.utterance_id, true, gender});

    std::vector<std::string> others;
    for (const auto& s : by_gender[gender])
      if (s != e.speaker_id) others.push_back(s);
    if (n_nontarget_per_target > others.size())
      throw ValidationError("n_nontarget_per_target=" + std::to_string(n_nontarget_per_target) +
                            " exceeds the " + std::to_string(others.size()) +
                            " other speakers of gender '" + gender + "'");
    // partial Fisher-Yates
    for (std::size_t k = 0; k < n_nontarget_per_target; ++k) {
      std::uniform_int_distribution<std::size_t> pick(k, others.size() - 1);
      std::swap(others[k], others[pick(rng)]);
      trials.push_back({others[k], e.utterance_id, false, gender});
    }
  }
  return trials;
}

std::string trials_to_csv(const std::vector<Trial>& trials) {
  std::string out = "enroll_speaker,trial_utterance,is_target,gender\n";
  for (const auto& t : trials)
    out += t.enroll_speaker + ',' + t.trial_utterance + ',' + (t.is_target ? '1' : '0') + ',' +
           t.gender + '\n';
  return out;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string f;
  while (std::getline(ss, f, ',')) fields.push_back(f);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open '" + path.string() + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void spill(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open '" + path.string() + "' for writing");
  f << text;
}

// Non-empty lines of a CSV body after checking its header.
std::vector<std::vector<std::string>> csv_rows(std::string_view text, std::string_view header,
                                               std::size_t n_fields) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) throw ParseError("empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != header) throw ParseError("line 1: expected header '" + std::string(header) + "'");
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto f = split_csv_line(line);
    if (f.size() != n_fields)
      throw ParseError("line " + std::to_string(line_no) + ": expected " + std::to_string(n_fields) +
                       " fields, got " + std::to_string(f.size()));
    rows.push_back(std::move(f));
  }
  return rows;
}

}  // namespace

std::vector<Trial> trials_from_csv(std::string_view text) {
  std::vector<Trial> out;
  for (auto& f : csv_rows(text, "enroll_speaker,trial_utterance,is_target,gender", 4)) {
    if (f[2] != "0" && f[2] != "1") throw ParseError("is_target must be 0 or 1, got '" + f[2] + "'");
    out.push_back({f[0], f[1], f[2] == "1", f[3]});
  }
  return out;
}

void write_trials(const std::vector<Trial>& trials, const std::filesystem::path& path) {
  spill(path, trials_to_csv(trials));
}

std::vector<Trial> read_trials(const std::filesystem::path& path) {
  return trials_from_csv(slurp(path));
}

// ---------------------------------------------------------------------------
// Scoring

std::map<std::string, Vector> enroll_speaker_models(const Corpus& enroll) {
  std::map<std::string, std::pair<Vector, std::size_t>> sums;
  for (const auto& e : enroll.embeddings) {
    auto [it, inserted] = sums.try_emplace(e.speaker_id, Vector::Zero(e.vector.size()), 0);
    it->second.first += e.vector;
    ++it->second.second;
  }
  std::map<std::string, Vector> models;
  for (auto& [spk, acc] : sums) models.emplace(spk, acc.first / static_cast<double>(acc.second));
  return models;
}

double cosine_score(const Vector& a, const Vector& b) {
  if (a.size() != b.size())
    throw ShapeError("cosine_score: lengths " + std::to_string(a.size()) + " and " +
                     std::to_string(b.size()));
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) throw DegenerateVectorError("degenerate vector: zero norm in cosine score");
  return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

ScoredTrials score_trials(const std::map<std::string, Vector>& models, const Corpus& trial_corpus,
                          const std::vector<Trial>& trials) {
  std::unordered_map<std::string_view, const Vector*> utt;
  for (const auto& e : trial_corpus.embeddings) utt.emplace(e.utterance_id, &e.vector);
  ScoredTrials out;
  out.trials = trials;
  out.scores.reserve(trials.size());
  for (const auto& t : trials) {
    auto m = models.find(t.enroll_speaker);
    if (m == models.end()) throw ValidationError("no speaker model for '" + t.enroll_speaker + "'");
    auto u = utt.find(t.trial_utterance);
    if (u == utt.end()) throw ValidationError("unknown trial utterance '" + t.trial_utterance + "'");
    out.scores.push_back(cosine_score(m->second, *u->second));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Probe attack

std::string_view to_string(Attribute a) {
  switch (a) {
    case Attribute::Gender: return "gender";
    case Attribute::Accent: return "accent";
    case Attribute::Speaker: return "speaker";
  }
  return "speaker";
}

Attribute parse_attribute(std::string_view name) {
  if (name == "gender") return Attribute::Gender;
  if (name == "accent") return Attribute::Accent;
  if (name == "speaker") return Attribute::Speaker;
  throw ValidationError("unknown attribute '" + std::string(name) + "'");
}

namespace {

const Vocab& vocab_for(const Corpus& c, Attribute a) {
  switch (a) {
    case Attribute::Gender: return c.gender_vocab;
    case Attribute::Accent: return c.accent_vocab;
    case Attribute::Speaker: return c.speaker_vocab;
  }
  return c.speaker_vocab;
}

const std::string& label_for(const Embedding& e, Attribute a) {
  switch (a) {
    case Attribute::Gender: return e.gender;
    case Attribute::Accent: return e.accent;
    case Attribute::Speaker: return e.speaker_id;
  }
  return e.speaker_id;
}

std::vector<int> attribute_labels(const Corpus& c, const Vocab& vocab, Attribute a) {
  std::vector<int> out;
  for (const auto& e : c.embeddings) out.push_back(vocab.index(label_for(e, a)));
  return out;
}

}  // namespace

double probe_attack(const Corpus& train, const Corpus& test, Attribute attribute,
                    std::uint64_t seed, const ProbeConfig& config) {
  const Vocab& vocab = vocab_for(train, attribute);
  if (vocab.size() < 2)
    throw ValidationError(std::string("probe attribute '") + std::string(to_string(attribute)) +
                          "' has fewer than 2 classes");
  if (train.empty() || test.empty()) throw ValidationError("probe needs non-empty train and test corpora");
  if (train.dim != test.dim) throw ShapeError("probe train/test dimensions differ");
  if (config.epochs < 1) throw ValidationError("probe epochs must be >= 1");

  BatchTensor x_train = train.matrix();
  BatchTensor x_test = test.matrix();
  // standardize with train statistics
  const Eigen::RowVectorXd mean = x_train.colwise().mean();
  Eigen::RowVectorXd sd =
      ((x_train.rowwise() - mean).array().square().colwise().mean()).sqrt().matrix();
  for (Eigen::Index j = 0; j < sd.size(); ++j)
    if (!(sd[j] > 1e-12)) sd[j] = 1.0;
  x_train = ((x_train.rowwise() - mean).array().rowwise() / sd.array()).matrix();
  x_test = ((x_test.rowwise() - mean).array().rowwise() / sd.array()).matrix();

  const auto y_train = attribute_labels(train, vocab, attribute);
  const auto y_test = attribute_labels(test, vocab, attribute);

  DenseLayer layer = make_dense(x_train.cols(), static_cast<Eigen::Index>(vocab.size()),
                                Activation::Linear, 0.01, seed);
  AdamConfig adam;
  adam.lr = config.lr;
  AdamState state;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    DenseCache cache;
    const BatchTensor logits = dense_forward(layer, x_train, &cache);
    const LossAndGrad ce = softmax_cross_entropy(logits, y_train);
    const DenseBackward bw = dense_backward(layer, cache, ce.grad);
    ParamSpans params;
    append_spans(params, layer);
    GradSpans grads;
    append_spans(grads, bw.params);
    adam_step(params, grads, state, adam);
  }
  return head_accuracy(dense_forward(layer, x_test), y_test);
}

}  // namespace aan
