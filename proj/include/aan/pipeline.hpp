#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "aan/anonymizer.hpp"
#include "aan/asv_eval.hpp"
#include "aan/dataset.hpp"
#include "aan/model.hpp"

namespace aan {

using Json = nlohmann::ordered_json;

// Everything a run needs. Schema documented in README.md; every field is
// optional in the file and falls back to the defaults below.
struct RunConfig {
  std::uint64_t seed = 40;  // the pinned desk seed
  std::filesystem::path out_dir = "aan_run";

  // corpus.seed is not read from the file: it is derived from `seed`.
  CorpusSpec corpus = default_desk_spec(0);
  std::size_t heldout_per_speaker = 10;
  std::size_t enroll_per_speaker = 5;

  std::size_t hidden = 128;
  std::size_t latent = 64;
  std::size_t branch_hidden = 32;
  TrainConfig train = default_train();

  std::size_t top_k = 10;
  std::filesystem::path model_path;  // empty: <out_dir>/model.aan
  std::filesystem::path pool_path;   // empty: <out_dir>/data/train.csv

  std::size_t n_nontarget_per_target = 10;
  bool probes = true;
  ProbeConfig probe;
  std::vector<double> sweep_lambdas{0.0, 1.0, 8.0};

  static RunConfig defaults();
  // desk-run training settings; the library TrainConfig keeps its own defaults
  static TrainConfig default_train();
  void validate() const;

  std::filesystem::path data_dir() const { return out_dir / "data"; }
  std::filesystem::path resolved_model_path() const;
  std::filesystem::path resolved_pool_path() const;
};

Json to_json(const RunConfig& config);
// Overlays the keys present in `j` on `base`. Unknown keys are rejected so a
// typo does not silently fall back to a default.
RunConfig run_config_from_json(const Json& j, RunConfig base = RunConfig::defaults());
// Accepts a config file or a manifest (its "config" key is used).
RunConfig load_run_config(const std::filesystem::path& path);

// Per-stage seeds, all derived from RunConfig::seed.
namespace stage {
inline constexpr const char* kCorpus = "corpus";
inline constexpr const char* kInit = "init";
inline constexpr const char* kTrain = "train";
inline constexpr const char* kTrials = "trials";
inline constexpr const char* kProbe = "probe";
}  // namespace stage
std::uint64_t stage_seed(const RunConfig& config, const char* stage_name);

CorpusSpec corpus_spec(const RunConfig& config);
CorpusSplit prepare_data(const RunConfig& config);
AanDims model_dims(const RunConfig& config, const Corpus& corpus);
TrainConfig train_config(const RunConfig& config, std::optional<double> lambda = {});
TrainResult train_stage(const RunConfig& config, const CorpusSplit& data,
                        std::optional<double> lambda = {});

// "dev" from the valid split, "test" from the test split; each is split into
// enrollment and trial sides.
std::vector<EvalSet> eval_sets(const RunConfig& config, const CorpusSplit& data);
// original, baseline, aan1, aan2.
std::vector<NamedMethod> standard_methods(std::shared_ptr<const AanModel> model,
                                          std::shared_ptr<const PseudoPool> pool,
                                          std::size_t top_k);
MetricsReport evaluate_stage(const RunConfig& config, const CorpusSplit& data,
                             std::shared_ptr<const AanModel> model,
                             std::shared_ptr<const PseudoPool> pool);

double mean_coordinate_variance(const Corpus& corpus);

struct GradcheckResult {
  double encoder = 0.0;
  double decoder = 0.0;
  double gender = 0.0;
  double accent = 0.0;
  double speaker = 0.0;
  double max() const;
};

// Tiny AAN (D=8, hidden 8, latent 4, classes 2/3/5, batch 4, lambda 8) with
// weights uniform(-0.1, 0.1); central differences at eps.
GradcheckResult gradient_check(std::uint64_t seed, double eps = 1e-5);

// ---------------------------------------------------------------------------
// Subcommands. Each writes its outputs plus <name>.manifest.json under
// out_dir and returns a process exit code.

struct AnonymizeArgs {
  MethodKind method = MethodKind::Identity;
  std::filesystem::path input;
  std::filesystem::path output;
  std::filesystem::path model;  // aan1, aan2
  std::filesystem::path pool;   // baseline, aan2
};

int cmd_gen_data(const RunConfig& config);
int cmd_train(const RunConfig& config);
int cmd_anonymize(const RunConfig& config, const AnonymizeArgs& args);
int cmd_evaluate(const RunConfig& config);
int cmd_sweep_lambda(const RunConfig& config);
int cmd_gradcheck(std::uint64_t seed, double threshold);
int cmd_report(const std::filesystem::path& rows_csv, const std::filesystem::path& probes_csv);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace aan
