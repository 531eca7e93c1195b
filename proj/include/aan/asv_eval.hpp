#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "aan/anonymizer.hpp"
#include "aan/dataset.hpp"
#include "aan/model.hpp"

namespace aan {

struct Trial {
  std::string enroll_speaker;
  std::string trial_utterance;
  bool is_target = false;
  std::string gender;

  bool operator==(const Trial&) const = default;
};

// One target trial per trial utterance plus n nontargets against distinct
// same-gender speakers, sampled without replacement.
std::vector<Trial> make_trials(const Corpus& enroll, const Corpus& trial,
                               std::size_t n_nontarget_per_target, std::uint64_t seed);

std::string trials_to_csv(const std::vector<Trial>& trials);
std::vector<Trial> trials_from_csv(std::string_view text);
void write_trials(const std::vector<Trial>& trials, const std::filesystem::path& path);
std::vector<Trial> read_trials(const std::filesystem::path& path);

// Per-speaker mean of the enrollment vectors.
std::map<std::string, Vector> enroll_speaker_models(const Corpus& enroll);

double cosine_score(const Vector& a, const Vector& b);

struct ScoredTrials {
  std::vector<Trial> trials;
  std::vector<double> scores;

  std::vector<double> target_scores() const;
  std::vector<double> nontarget_scores() const;
};

ScoredTrials score_trials(const std::map<std::string, Vector>& models, const Corpus& trial_corpus,
                          const std::vector<Trial>& trials);

// EER as a fraction. Thresholds are the observed scores; FRR counts targets
// strictly below, FAR nontargets at or above. Returns (FAR+FRR)/2 at the
// threshold with the smallest |FAR-FRR|, the lowest such threshold on ties.
double compute_eer(std::span<const double> targets, std::span<const double> nontargets);
double compute_eer(const ScoredTrials& scored);

// Scores taken as natural-log likelihood ratios; result in bits.
double compute_cllr(std::span<const double> targets, std::span<const double> nontargets);
double compute_cllr(const ScoredTrials& scored);

// Optimally calibrated LLRs via pool-adjacent-violators, aligned with the
// concatenation [targets, nontargets]. Posteriors are clipped to
// [1e-12, 1 - 1e-12] and the empirical prior odds removed.
std::vector<double> pav_calibrated_llrs(std::span<const double> targets,
                                        std::span<const double> nontargets);
double compute_min_cllr(std::span<const double> targets, std::span<const double> nontargets);
double compute_min_cllr(const ScoredTrials& scored);

struct ProbeConfig {
  std::size_t epochs = 300;
  double lr = 0.05;
};

// Trains a linear softmax classifier for `attribute` on `train` and returns
// its top-1 accuracy on `test`.
double probe_attack(const Corpus& train, const Corpus& test, Attribute attribute,
                    std::uint64_t seed, const ProbeConfig& config = {});

std::string_view to_string(Attribute a);
Attribute parse_attribute(std::string_view name);

// ---------------------------------------------------------------------------
// Condition matrix

struct MetricsRow {
  std::string method;
  std::string dataset;
  char enroll = 'o';  // 'o' original, 'a' anonymized
  char trial = 'o';
  std::string gender;
  double eer_percent = 0.0;
  double min_cllr = 0.0;
  double cllr = 0.0;
  std::size_t n_target = 0;
  std::size_t n_nontarget = 0;

  bool operator==(const MetricsRow&) const = default;
};

struct ProbeRow {
  std::string method;
  std::string attribute;
  double accuracy = 0.0;

  bool operator==(const ProbeRow&) const = default;
};

struct MetricsReport {
  std::vector<MetricsRow> rows;
  std::vector<ProbeRow> probes;

  const MetricsRow* find(std::string_view method, std::string_view dataset, char enroll, char trial,
                         std::string_view gender) const;
  const ProbeRow* find_probe(std::string_view method, std::string_view attribute) const;

  std::string rows_csv() const;
  std::string probes_csv() const;
  // Aligned text tables; ASV columns follow EER, minCllr, Cllr, Enroll, Trial, Gen.
  std::string to_table() const;
  bool operator==(const MetricsReport&) const = default;
};

MetricsReport read_report_csv(std::string_view rows_csv, std::string_view probes_csv);

struct EvalSet {
  std::string tag;
  Corpus enroll;
  Corpus trial;
};

struct NamedMethod {
  std::string name;
  AnonymizationMethod method;
};

struct TrialConfig {
  std::size_t n_nontarget_per_target = 10;
  std::uint64_t seed = 0;
};

// Optional probe corpora: the probe is trained on the anonymized train side
// and tested on the anonymized test side.
struct ProbeSet {
  Corpus train;
  Corpus test;
  ProbeConfig config;
  std::uint64_t seed = 0;
};

// For each method and eval set: o-o, o-a and a-a cells split by gender.
MetricsReport evaluate_conditions(const std::vector<EvalSet>& sets,
                                  const std::vector<NamedMethod>& methods,
                                  const TrialConfig& trials, const ProbeSet* probes = nullptr);

}  // namespace aan
