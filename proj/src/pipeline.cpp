#include "aan/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <random>
#include <sstream>

#include "aan/digest.hpp"
#include "aan/errors.hpp"
#include "aan/seed.hpp"

namespace aan {

namespace fs = std::filesystem;

RunConfig RunConfig::defaults() { return RunConfig{}; }

TrainConfig RunConfig::default_train() {
  TrainConfig t;
  t.epochs = 300;
  t.batch_size = 64;
  t.adam.lr = 2e-3;
  t.selection = Selection::LastEpoch;
  return t;
}

void RunConfig::validate() const {
  corpus.validate();
  train.validate();
  if (out_dir.empty()) throw ValidationError("out_dir must not be empty");
  if (enroll_per_speaker < 1) throw ValidationError("split.enroll_per_speaker must be >= 1");
  if (heldout_per_speaker <= enroll_per_speaker)
    throw ValidationError("split.heldout_per_speaker must exceed split.enroll_per_speaker");
  if (2 * heldout_per_speaker >= corpus.utterances_per_speaker)
    throw ValidationError("split.heldout_per_speaker leaves no training utterances");
  if (hidden < 1 || latent < 1 || branch_hidden < 1)
    throw ValidationError("model widths must be >= 1");
  if (top_k < 1) throw ValidationError("anonymize.top_k must be >= 1");
  if (n_nontarget_per_target < 1) throw ValidationError("trials.n_nontarget_per_target must be >= 1");
  if (probe.epochs < 1) throw ValidationError("probe.epochs must be >= 1");
  if (!std::isfinite(probe.lr) || probe.lr <= 0) throw ValidationError("probe.lr must be positive");
  for (double l : sweep_lambdas)
    if (!std::isfinite(l) || l < 0) throw ValidationError("sweep.lambdas must be nonnegative");
}

fs::path RunConfig::resolved_model_path() const {
  return model_path.empty() ? out_dir / "model.aan" : model_path;
}

fs::path RunConfig::resolved_pool_path() const {
  return pool_path.empty() ? data_dir() / "train.csv" : pool_path;
}

// ---------------------------------------------------------------------------
// JSON

Json to_json(const RunConfig& c) {
  const auto& s = c.corpus;
  return Json{
      {"seed", c.seed},
      {"out_dir", c.out_dir.string()},
      {"corpus",
       {{"n_speakers", s.n_speakers},
        {"n_genders", s.n_genders},
        {"n_accents", s.n_accents},
        {"utterances_per_speaker", s.utterances_per_speaker},
        {"dim", s.dim},
        {"speaker_strength", s.attribute_strength.speaker},
        {"gender_strength", s.attribute_strength.gender},
        {"accent_strength", s.attribute_strength.accent},
        {"noise_sigma", s.noise_sigma}}},
      {"split",
       {{"heldout_per_speaker", c.heldout_per_speaker},
        {"enroll_per_speaker", c.enroll_per_speaker}}},
      {"model", {{"hidden", c.hidden}, {"latent", c.latent}, {"branch_hidden", c.branch_hidden}}},
      {"train",
       {{"lambda", c.train.lambda},
        {"epochs", c.train.epochs},
        {"batch_size", c.train.batch_size},
        {"optimizer", c.train.optimizer == OptimizerKind::Adam ? "adam" : "sgd"},
        {"lr", c.train.optimizer == OptimizerKind::Adam ? c.train.adam.lr : c.train.sgd_lr},
        {"betas", {c.train.adam.beta1, c.train.adam.beta2}},
        {"eps", c.train.adam.eps},
        {"shuffle", c.train.shuffle},
        {"selection", c.train.selection == Selection::LastEpoch ? "last" : "best_valid"}}},
      {"anonymize",
       {{"top_k", c.top_k},
        {"model", c.model_path.string()},
        {"pool", c.pool_path.string()}}},
      {"trials", {{"n_nontarget_per_target", c.n_nontarget_per_target}}},
      {"probe", {{"enabled", c.probes}, {"epochs", c.probe.epochs}, {"lr", c.probe.lr}}},
      {"sweep", {{"lambdas", c.sweep_lambdas}}},
  };
}

namespace {

void check_keys(const Json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ValidationError("config: '" + where + "' must be an object");
  for (const auto& [k, _] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || k == a;
    if (!ok) throw ValidationError("config: unknown key '" + where + (where.empty() ? "" : ".") + k + "'");
  }
}

template <class T>
void get(const Json& obj, const char* key, const std::string& where, T& out) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ValidationError("config: bad value for '" + where + "." + key + "'");
  }
}

// Counts: JSON integers only, and non-negative.
void get_count(const Json& obj, const char* key, const std::string& where, std::size_t& out) {
  if (!obj.contains(key)) return;
  const Json& v = obj.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0)
    throw ValidationError("config: '" + where + "." + key + "' must be a nonnegative integer");
  out = v.get<std::size_t>();
}

}  // namespace

RunConfig run_config_from_json(const Json& j, RunConfig c) {
  check_keys(j, "", {"seed", "out_dir", "corpus", "split", "model", "train", "anonymize", "trials",
                     "probe", "sweep"});
  if (j.contains("seed")) {
    const Json& v = j.at("seed");
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
      throw ValidationError("config: 'seed' must be a nonnegative integer");
    c.seed = v.get<std::uint64_t>();
  }
  if (j.contains("out_dir")) {
    std::string s;
    get(j, "out_dir", "", s);
    c.out_dir = s;
  }
  if (j.contains("corpus")) {
    const Json& o = j.at("corpus");
    check_keys(o, "corpus", {"n_speakers", "n_genders", "n_accents", "utterances_per_speaker", "dim",
                             "speaker_strength", "gender_strength", "accent_strength", "noise_sigma"});
    auto& s = c.corpus;
    get_count(o, "n_speakers", "corpus", s.n_speakers);
    get_count(o, "n_genders", "corpus", s.n_genders);
    get_count(o, "n_accents", "corpus", s.n_accents);
    get_count(o, "utterances_per_speaker", "corpus", s.utterances_per_speaker);
    get_count(o, "dim", "corpus", s.dim);
    get(o, "speaker_strength", "corpus", s.attribute_strength.speaker);
    get(o, "gender_strength", "corpus", s.attribute_strength.gender);
    get(o, "accent_strength", "corpus", s.attribute_strength.accent);
    get(o, "noise_sigma", "corpus", s.noise_sigma);
  }
  if (j.contains("split")) {
    const Json& o = j.at("split");
    check_keys(o, "split", {"heldout_per_speaker", "enroll_per_speaker"});
    get_count(o, "heldout_per_speaker", "split", c.heldout_per_speaker);
    get_count(o, "enroll_per_speaker", "split", c.enroll_per_speaker);
  }
  if (j.contains("model")) {
    const Json& o = j.at("model");
    check_keys(o, "model", {"hidden", "latent", "branch_hidden"});
    get_count(o, "hidden", "model", c.hidden);
    get_count(o, "latent", "model", c.latent);
    get_count(o, "branch_hidden", "model", c.branch_hidden);
  }
  if (j.contains("train")) {
    const Json& o = j.at("train");
    check_keys(o, "train", {"lambda", "epochs", "batch_size", "optimizer", "lr", "betas", "eps",
                            "shuffle", "selection"});
    auto& t = c.train;
    get(o, "lambda", "train", t.lambda);
    get_count(o, "epochs", "train", t.epochs);
    get_count(o, "batch_size", "train", t.batch_size);
    if (o.contains("optimizer")) {
      std::string name;
      get(o, "optimizer", "train", name);
      if (name == "adam") t.optimizer = OptimizerKind::Adam;
      else if (name == "sgd") t.optimizer = OptimizerKind::Sgd;
      else throw ValidationError("config: 'train.optimizer' must be adam or sgd");
    }
    if (o.contains("lr")) {
      double lr = 0;
      get(o, "lr", "train", lr);
      t.adam.lr = lr;
      t.sgd_lr = lr;
    }
    if (o.contains("betas")) {
      std::vector<double> b;
      get(o, "betas", "train", b);
      if (b.size() != 2) throw ValidationError("config: 'train.betas' must have two entries");
      t.adam.beta1 = b[0];
      t.adam.beta2 = b[1];
    }
    get(o, "eps", "train", t.adam.eps);
    get(o, "shuffle", "train", t.shuffle);
    if (o.contains("selection")) {
      std::string name;
      get(o, "selection", "train", name);
      if (name == "last") t.selection = Selection::LastEpoch;
      else if (name == "best_valid") t.selection = Selection::BestValidLoss;
      else throw ValidationError("config: 'train.selection' must be last or best_valid");
    }
  }
  if (j.contains("anonymize")) {
    const Json& o = j.at("anonymize");
    check_keys(o, "anonymize", {"top_k", "model", "pool"});
    get_count(o, "top_k", "anonymize", c.top_k);
    std::string s = c.model_path.string();
    get(o, "model", "anonymize", s);
    c.model_path = s;
    s = c.pool_path.string();
    get(o, "pool", "anonymize", s);
    c.pool_path = s;
  }
  if (j.contains("trials")) {
    const Json& o = j.at("trials");
    check_keys(o, "trials", {"n_nontarget_per_target"});
    get_count(o, "n_nontarget_per_target", "trials", c.n_nontarget_per_target);
  }
  if (j.contains("probe")) {
    const Json& o = j.at("probe");
    check_keys(o, "probe", {"enabled", "epochs", "lr"});
    get(o, "enabled", "probe", c.probes);
    get_count(o, "epochs", "probe", c.probe.epochs);
    get(o, "lr", "probe", c.probe.lr);
  }
  if (j.contains("sweep")) {
    const Json& o = j.at("sweep");
    check_keys(o, "sweep", {"lambdas"});
    get(o, "lambdas", "sweep", c.sweep_lambdas);
  }
  c.validate();
  return c;
}

std::string read_text_file(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_text_file(const fs::path& path, std::string_view text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open '" + path.string() + "' for writing");
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!f) throw Error("write to '" + path.string() + "' failed");
}

RunConfig load_run_config(const fs::path& path) {
  Json j;
  try {
    j = Json::parse(read_text_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("config '" + path.string() + "': " + e.what());
  }
  if (j.is_object() && j.contains("config") && j.contains("tool_version")) j = j.at("config");
  return run_config_from_json(j);
}

// ---------------------------------------------------------------------------
// Stages

std::uint64_t stage_seed(const RunConfig& config, const char* stage_name) {
  return derive_seed(config.seed, stage_name);
}

CorpusSpec corpus_spec(const RunConfig& config) {
  CorpusSpec s = config.corpus;
  s.seed = stage_seed(config, stage::kCorpus);
  return s;
}

CorpusSplit prepare_data(const RunConfig& config) {
  config.validate();
  return split_corpus(generate_corpus(corpus_spec(config)), config.heldout_per_speaker);
}

AanDims model_dims(const RunConfig& config, const Corpus& corpus) {
  AanDims d = AanDims::for_corpus(corpus);
  d.hidden = config.hidden;
  d.latent = config.latent;
  d.branch_hidden = config.branch_hidden;
  return d;
}

TrainConfig train_config(const RunConfig& config, std::optional<double> lambda) {
  TrainConfig t = config.train;
  if (lambda) t.lambda = *lambda;
  t.seed = stage_seed(config, stage::kTrain);
  return t;
}

TrainResult train_stage(const RunConfig& config, const CorpusSplit& data,
                        std::optional<double> lambda) {
  const TrainConfig t = train_config(config, lambda);
  AanModel init = build_aan(model_dims(config, data.train), t.lambda, stage_seed(config, stage::kInit));
  return train(std::move(init), data.train, data.valid, t);
}

std::vector<EvalSet> eval_sets(const RunConfig& config, const CorpusSplit& data) {
  auto [de, dt] = split_enroll_trial(data.valid, config.enroll_per_speaker);
  auto [te, tt] = split_enroll_trial(data.test, config.enroll_per_speaker);
  return {{"dev", std::move(de), std::move(dt)}, {"test", std::move(te), std::move(tt)}};
}

std::vector<NamedMethod> standard_methods(std::shared_ptr<const AanModel> model,
                                          std::shared_ptr<const PseudoPool> pool,
                                          std::size_t top_k) {
  return {{"original", AnonymizationMethod::identity()},
          {"baseline", AnonymizationMethod::baseline(pool, top_k)},
          {"aan1", AnonymizationMethod::aan1(model)},
          {"aan2", AnonymizationMethod::aan2(model, pool, top_k)}};
}

MetricsReport evaluate_stage(const RunConfig& config, const CorpusSplit& data,
                             std::shared_ptr<const AanModel> model,
                             std::shared_ptr<const PseudoPool> pool) {
  const auto methods = standard_methods(std::move(model), std::move(pool), config.top_k);
  const TrialConfig trials{config.n_nontarget_per_target, stage_seed(config, stage::kTrials)};
  if (!config.probes) return evaluate_conditions(eval_sets(config, data), methods, trials);
  const ProbeSet probes{data.train, data.test, config.probe, stage_seed(config, stage::kProbe)};
  return evaluate_conditions(eval_sets(config, data), methods, trials, &probes);
}

double mean_coordinate_variance(const Corpus& corpus) {
  if (corpus.empty()) throw ValidationError("variance of an empty corpus");
  const Eigen::MatrixXd x = corpus.matrix();
  const Eigen::RowVectorXd mean = x.colwise().mean();
  return (x.rowwise() - mean).array().square().colwise().mean().mean();
}

double GradcheckResult::max() const {
  return std::max({encoder, decoder, gender, accent, speaker});
}

GradcheckResult gradient_check(std::uint64_t seed, double eps) {
  AanDims d;
  d.input = 8;
  d.hidden = 8;
  d.latent = 4;
  d.branch_hidden = 8;
  d.gender_classes = 2;
  d.accent_classes = 3;
  d.speaker_classes = 5;
  // Central differences are only meaningful away from ReLU kinks: redraw the
  // point until every branch pre-activation is at least 10 eps from zero.
  AanModel model;
  LabeledBatch batch;
  for (int attempt = 0;; ++attempt) {
    const std::string tag = "gradcheck-" + std::to_string(attempt);
    model = build_aan_uniform(d, 8.0, 0.1, derive_seed(seed, tag + "-model"));
    std::mt19937_64 rng(derive_seed(seed, tag + "-batch"));
    std::normal_distribution<double> normal;
    batch = LabeledBatch{};
    batch.x = BatchTensor(4, 8);
    for (Eigen::Index i = 0; i < batch.x.size(); ++i) batch.x.data()[i] = normal(rng);
    for (int r = 0; r < 4; ++r) {
      batch.gender.push_back(r % 2);
      batch.accent.push_back(r % 3);
      batch.speaker.push_back((r * 2) % 5);
    }
    const BatchTensor z = aan_forward(model, batch.x).latent;
    double nearest = std::numeric_limits<double>::infinity();
    for (const Branch* b : {&model.gender_head, &model.accent_head, &model.speaker_head}) {
      const BatchTensor pre = (z * b->hidden.weights.transpose()).rowwise() + b->hidden.bias.transpose();
      nearest = std::min(nearest, pre.cwiseAbs().minCoeff());
    }
    if (nearest >= 10 * eps) break;
    if (attempt == 1000) throw Error("gradient_check: no kink-free point found");
  }

  const LossAndGrads lg = aan_loss_and_grads(model, batch);
  GradcheckResult out;

  ParamSpans enc, dec;
  GradSpans enc_g, dec_g;
  for (auto& l : model.encoder) append_spans(enc, l);
  for (auto& g : lg.grads.encoder) append_spans(enc_g, g);
  for (auto& l : model.decoder) append_spans(dec, l);
  for (auto& g : lg.grads.decoder) append_spans(dec_g, g);
  out.encoder = finite_difference_check(
      [&] { return aan_loss(model, batch).encoder_objective(model.lambda); }, enc, enc_g, eps);
  out.decoder = finite_difference_check([&] { return aan_loss(model, batch).l_au; }, dec, dec_g, eps);

  auto head = [&](Branch& b, const BranchGrads& g, double LossBreakdown::*term) {
    ParamSpans p;
    GradSpans pg;
    append_spans(p, b.hidden);
    append_spans(p, b.logits);
    append_spans(pg, g.hidden);
    append_spans(pg, g.logits);
    return finite_difference_check([&] { return aan_loss(model, batch).*term; }, p, pg, eps);
  };
  out.gender = head(model.gender_head, lg.grads.gender_head, &LossBreakdown::l_gender);
  out.accent = head(model.accent_head, lg.grads.accent_head, &LossBreakdown::l_accent);
  out.speaker = head(model.speaker_head, lg.grads.speaker_head, &LossBreakdown::l_speaker);
  return out;
}

// ---------------------------------------------------------------------------
// Subcommands

namespace {

using Clock = std::chrono::steady_clock;

class Manifest {
 public:
  Manifest(std::string command, const RunConfig* config) : command_(std::move(command)) {
    if (config) config_ = to_json(*config);
  }
  void input(const fs::path& p) { inputs_[p.generic_string()] = sha256_file(p); }
  void output(const fs::path& p) { outputs_[p.generic_string()] = sha256_file(p); }
  void extra(const std::string& key, Json value) { extra_[key] = std::move(value); }

  void write(const fs::path& path) const {
    Json j{{"command", command_},
           {"tool_version", AAN_VERSION},
           {"config", config_},
           {"inputs", inputs_},
           {"outputs", outputs_},
           {"elapsed_seconds", std::chrono::duration<double>(Clock::now() - start_).count()}};
    for (const auto& [k, v] : extra_.items()) j[k] = v;
    write_text_file(path, j.dump(2) + "\n");
  }

 private:
  std::string command_;
  Json config_ = nullptr;
  Json inputs_ = Json::object();
  Json outputs_ = Json::object();
  Json extra_ = Json::object();
  Clock::time_point start_ = Clock::now();
};

void log(const std::string& msg) { std::cerr << "[aan] " << msg << "\n"; }

fs::path split_path(const RunConfig& c, const char* name) { return c.data_dir() / (std::string(name) + ".csv"); }

CorpusSplit load_splits(const RunConfig& c, Manifest& m) {
  CorpusSplit s;
  const std::pair<const char*, std::pair<Corpus*, SplitTag>> parts[] = {
      {"train", {&s.train, SplitTag::Train}},
      {"valid", {&s.valid, SplitTag::Valid}},
      {"test", {&s.test, SplitTag::Test}}};
  for (const auto& [name, target] : parts) {
    const fs::path p = split_path(c, name);
    if (!fs::exists(p)) throw Error("missing '" + p.string() + "'; run gen-data first");
    *target.first = read_corpus(p, target.second);
    m.input(p);
  }
  return s;
}

std::shared_ptr<const PseudoPool> load_pool(const fs::path& p, Manifest& m) {
  auto pool = std::make_shared<const PseudoPool>(PseudoPool::from_corpus(read_corpus(p), p.string()));
  m.input(p);
  return pool;
}

std::string fmt_lambda(double l) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", l);
  return buf;
}

void write_report(const MetricsReport& rep, const fs::path& dir, Manifest& m) {
  const fs::path rows = dir / "report_rows.csv";
  const fs::path probes = dir / "report_probes.csv";
  const fs::path table = dir / "report.txt";
  write_text_file(rows, rep.rows_csv());
  write_text_file(probes, rep.probes_csv());
  write_text_file(table, rep.to_table());
  m.output(rows);
  m.output(probes);
  m.output(table);
}

void log_training(const TrainResult& r) {
  const auto& h = r.history;
  const auto& best = h.epochs[h.best_epoch];
  const auto& last = h.epochs.back();
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "trained %zu epochs%s; selected epoch %zu valid l_au %.4f; last speaker-head acc %.3f",
                last.epoch, h.diverged ? " (diverged)" : "", best.epoch, best.valid.l_au,
                last.valid_speaker_acc);
  log(buf);
}

}  // namespace

int cmd_gen_data(const RunConfig& config) {
  config.validate();
  Manifest m("gen-data", &config);
  const CorpusSplit s = prepare_data(config);
  for (const auto& [name, corpus] :
       {std::pair<const char*, const Corpus*>{"train", &s.train}, {"valid", &s.valid}, {"test", &s.test}}) {
    const fs::path p = split_path(config, name);
    write_text_file(p, corpus_to_csv(*corpus));
    m.output(p);
  }
  m.write(config.out_dir / "gen-data.manifest.json");
  log("wrote " + std::to_string(s.train.size() + s.valid.size() + s.test.size()) +
      " embeddings to " + config.data_dir().string());
  return 0;
}

int cmd_train(const RunConfig& config) {
  config.validate();
  Manifest m("train", &config);
  const CorpusSplit s = load_splits(config, m);
  log("training lambda=" + fmt_lambda(config.train.lambda) + " for " +
      std::to_string(config.train.epochs) + " epochs");
  const TrainResult r = train_stage(config, s);
  log_training(r);
  const fs::path model = config.resolved_model_path();
  const fs::path history = config.out_dir / "history.csv";
  if (model.has_parent_path()) fs::create_directories(model.parent_path());
  save_model(r.model, model);
  write_history_csv(r.history, history);
  m.output(model);
  m.output(history);
  m.extra("selected_epoch", r.history.epochs[r.history.best_epoch].epoch);
  m.extra("diverged", r.history.diverged);
  m.write(config.out_dir / "train.manifest.json");
  return r.history.diverged ? 1 : 0;
}

int cmd_anonymize(const RunConfig& config, const AnonymizeArgs& a) {
  Manifest m("anonymize", &config);
  m.extra("method", std::string(to_string(a.method)));
  const Corpus in = read_corpus(a.input);
  m.input(a.input);

  const bool needs_model = a.method == MethodKind::Aan1 || a.method == MethodKind::Aan2;
  const bool needs_pool = a.method == MethodKind::BaselineFarthest || a.method == MethodKind::Aan2;
  if (needs_model && a.model.empty())
    throw ValidationError(std::string(to_string(a.method)) + " requires --model");
  if (needs_pool && a.pool.empty())
    throw ValidationError(std::string(to_string(a.method)) + " requires --pool");

  AnonymizationMethod method;
  method.kind = a.method;
  method.top_k = config.top_k;
  if (needs_model) {
    method.model = std::make_shared<const AanModel>(load_model(a.model));
    m.input(a.model);
  }
  if (needs_pool) method.pool = load_pool(a.pool, m);

  const Corpus out = anonymize_corpus(in, method);
  // Identity copies the bytes through so the output digest equals the input's.
  if (a.method == MethodKind::Identity)
    write_text_file(a.output, read_text_file(a.input));
  else
    write_text_file(a.output, corpus_to_csv(out));
  m.output(a.output);
  fs::path mpath = a.output;
  mpath += ".manifest.json";
  m.write(mpath);
  log("anonymized " + std::to_string(out.size()) + " embeddings with " +
      std::string(to_string(a.method)));
  return 0;
}

int cmd_evaluate(const RunConfig& config) {
  config.validate();
  Manifest m("evaluate", &config);
  const CorpusSplit s = load_splits(config, m);
  const fs::path mp = config.resolved_model_path();
  auto model = std::make_shared<const AanModel>(load_model(mp));
  m.input(mp);
  auto pool = load_pool(config.resolved_pool_path(), m);
  const MetricsReport rep = evaluate_stage(config, s, model, pool);
  write_report(rep, config.out_dir, m);
  m.write(config.out_dir / "evaluate.manifest.json");
  std::cout << rep.to_table();
  return 0;
}

int cmd_sweep_lambda(const RunConfig& config) {
  config.validate();
  Manifest m("sweep-lambda", &config);
  const CorpusSplit s = load_splits(config, m);
  auto pool = load_pool(config.resolved_pool_path(), m);
  std::string summary = "lambda,selected_epoch,final_valid_l_au,final_valid_speaker_acc,diverged\n";
  bool diverged = false;
  for (double lambda : config.sweep_lambdas) {
    const fs::path dir = config.out_dir / "sweep" / ("lambda_" + fmt_lambda(lambda));
    fs::create_directories(dir);
    log("sweep: lambda=" + fmt_lambda(lambda));
    const TrainResult r = train_stage(config, s, lambda);
    log_training(r);
    save_model(r.model, dir / "model.aan");
    write_history_csv(r.history, dir / "history.csv");
    m.output(dir / "model.aan");
    m.output(dir / "history.csv");
    RunConfig sub = config;
    sub.train.lambda = lambda;
    write_report(evaluate_stage(sub, s, std::make_shared<const AanModel>(r.model), pool), dir, m);
    const auto& last = r.history.epochs.back();
    char line[160];
    std::snprintf(line, sizeof line, "%.17g,%zu,%.17g,%.17g,%d\n", lambda,
                  r.history.epochs[r.history.best_epoch].epoch, last.valid.l_au,
                  last.valid_speaker_acc, r.history.diverged ? 1 : 0);
    summary += line;
    diverged = diverged || r.history.diverged;
  }
  const fs::path sp = config.out_dir / "sweep" / "summary.csv";
  write_text_file(sp, summary);
  m.output(sp);
  m.write(config.out_dir / "sweep-lambda.manifest.json");
  std::cout << summary;
  return diverged ? 1 : 0;
}

int cmd_gradcheck(std::uint64_t seed, double threshold) {
  const GradcheckResult r = gradient_check(seed);
  std::printf("encoder %.3e\ndecoder %.3e\ngender  %.3e\naccent  %.3e\nspeaker %.3e\nmax     %.3e\n",
              r.encoder, r.decoder, r.gender, r.accent, r.speaker, r.max());
  return r.max() < threshold ? 0 : 1;
}

int cmd_report(const fs::path& rows_csv, const fs::path& probes_csv) {
  const MetricsReport rep = read_report_csv(read_text_file(rows_csv),
                                            probes_csv.empty() ? "" : read_text_file(probes_csv));
  std::cout << rep.to_table();
  return 0;
}

}  // namespace aan
