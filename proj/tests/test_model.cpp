#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "aan/errors.hpp"
#include "aan/model.hpp"
#include "aan/pipeline.hpp"
#include "two_role.hpp"

using namespace aan;

namespace {

AanDims tiny_dims() {
  AanDims d;
  d.input = 6;
  d.hidden = 7;
  d.latent = 4;
  d.branch_hidden = 5;
  d.gender_classes = 2;
  d.accent_classes = 3;
  d.speaker_classes = 5;
  return d;
}

LabeledBatch tiny_batch(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  LabeledBatch b;
  b.x.resize(static_cast<Eigen::Index>(n), 6);
  for (Eigen::Index i = 0; i < b.x.size(); ++i) b.x.data()[i] = normal(rng);
  for (std::size_t i = 0; i < n; ++i) {
    b.gender.push_back(static_cast<int>(i % 2));
    b.accent.push_back(static_cast<int>(i % 3));
    b.speaker.push_back(static_cast<int>((3 * i) % 5));
  }
  return b;
}

void zero_all(AanModel& m) {
  for (auto span : m.parameters()) std::fill(span.begin(), span.end(), 0.0);
}

CorpusSplit small_desk_data(std::uint64_t seed) {
  CorpusSpec s = default_desk_spec(seed);
  s.n_speakers = 8;
  s.utterances_per_speaker = 12;
  s.dim = 10;
  return split_corpus(generate_corpus(s), 2);
}

}  // namespace

TEST_CASE("full-scale head widths") {
  const AanDims d = AanDims::full_scale();
  CHECK(d.speaker_classes == 1251);
  CHECK(d.accent_classes == 30);
  CHECK(d.gender_classes == 2);
  CHECK(d.hidden == 512);
  AanDims small = d;
  small.input = 16;
  const AanModel m = build_aan(small, 8.0, 1);
  CHECK(m.speaker_head.logits.out_size() == 1251);
  CHECK(m.accent_head.logits.out_size() == 30);
}

TEST_CASE("build is deterministic and seed-dependent") {
  const AanModel a = build_aan(tiny_dims(), 8.0, 4);
  const AanModel b = build_aan(tiny_dims(), 8.0, 4);
  const AanModel c = build_aan(tiny_dims(), 8.0, 5);
  CHECK(oracle::max_param_diff(a, b) == 0.0);
  CHECK(oracle::max_param_diff(a, c) > 0.0);
  CHECK(a.encoder.size() + a.decoder.size() == 4);
  CHECK(a.lambda == 8.0);
}

TEST_CASE("initialisation bound is 1/sqrt(fan_in) and biases start at zero") {
  AanModel m = build_aan(tiny_dims(), 8.0, 6);
  CHECK(m.encoder[0].weights.cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(6.0));
  CHECK(m.encoder[1].weights.cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(7.0));
  CHECK(m.speaker_head.logits.weights.cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(5.0));
  CHECK(m.decoder[1].bias.isZero(0));
}

TEST_CASE("invalid dims are rejected") {
  AanDims d = tiny_dims();
  d.latent = 0;
  CHECK_THROWS_AS(build_aan(d, 8.0, 0), ValidationError);
  CHECK_THROWS_AS(build_aan(tiny_dims(), -1.0, 0), ValidationError);
}

TEST_CASE("forward shapes and zero model") {
  AanModel m = build_aan(tiny_dims(), 8.0, 7);
  const LabeledBatch b = tiny_batch(3, 1);
  const AanOutput out = aan_forward(m, b.x);
  CHECK(out.reconstruction.cols() == 6);
  CHECK(out.latent.cols() == 4);
  CHECK(out.gender_logits.cols() == 2);
  CHECK(out.accent_logits.cols() == 3);
  CHECK(out.speaker_logits.cols() == 5);
  CHECK_THROWS_AS(aan_forward(m, Eigen::MatrixXd::Zero(2, 5)), ShapeError);

  zero_all(m);
  m.decoder[1].bias << 1, 2, 3, 4, 5, 6;
  m.speaker_head.logits.bias << -1, 0, 1, 2, 3;
  const AanOutput z = aan_forward(m, b.x);
  for (Eigen::Index r = 0; r < 3; ++r) {
    CHECK(z.reconstruction.row(r).transpose() == m.decoder[1].bias);
    CHECK(z.speaker_logits.row(r).transpose() == m.speaker_head.logits.bias);
  }
}

TEST_CASE("identical rows give identical outputs") {
  const AanModel m = build_aan(tiny_dims(), 8.0, 8);
  LabeledBatch b = tiny_batch(3, 2);
  b.x.row(2) = b.x.row(0);
  const AanOutput out = aan_forward(m, b.x);
  CHECK(out.reconstruction.row(0) == out.reconstruction.row(2));
  CHECK(out.gender_logits.row(0) == out.gender_logits.row(2));
}

TEST_CASE("lambda = 0 detaches the branches from the encoder") {
  AanModel detached = build_aan(tiny_dims(), 0.0, 9);
  AanModel silent = detached;
  silent.lambda = 8.0;
  // zero head weights: no gradient can reach the latent through them
  for (Branch* b : {&silent.gender_head, &silent.accent_head, &silent.speaker_head}) {
    b->hidden.weights.setZero();
    b->logits.weights.setZero();
  }
  const LabeledBatch batch = tiny_batch(4, 3);
  const auto a = aan_loss_and_grads(detached, batch).grads;
  const auto s = aan_loss_and_grads(silent, batch).grads;
  for (std::size_t i = 0; i < a.encoder.size(); ++i) {
    CHECK(a.encoder[i].weights == s.encoder[i].weights);
    CHECK(a.encoder[i].bias == s.encoder[i].bias);
  }
}

TEST_CASE("analytic gradients match finite differences per parameter group") {
  for (std::uint64_t seed : {0ULL, 1ULL, 2ULL, 3ULL}) {
    const GradcheckResult r = gradient_check(seed);
    CAPTURE(seed);
    CHECK(r.encoder < 1e-4);
    CHECK(r.decoder < 1e-4);
    CHECK(r.gender < 1e-4);
    CHECK(r.accent < 1e-4);
    CHECK(r.speaker < 1e-4);
  }
}

TEST_CASE("duplicating the batch leaves the losses unchanged") {
  const AanModel m = build_aan(tiny_dims(), 8.0, 10);
  const LabeledBatch b = tiny_batch(5, 4);
  std::vector<std::size_t> twice;
  for (std::size_t i = 0; i < 5; ++i) twice.insert(twice.end(), {i, i});
  const LossBreakdown one = aan_loss(m, b);
  const LossBreakdown two = aan_loss(m, b.rows(twice));
  CHECK(two.l_au == doctest::Approx(one.l_au).epsilon(1e-14));
  CHECK(two.l_gender == doctest::Approx(one.l_gender).epsilon(1e-14));
  CHECK(two.l_accent == doctest::Approx(one.l_accent).epsilon(1e-14));
  CHECK(two.l_speaker == doctest::Approx(one.l_speaker).epsilon(1e-14));
  CHECK(one.total_reported() == doctest::Approx(one.l_au + one.l_z()));
}

TEST_CASE("labels outside the head range are rejected") {
  const AanModel m = build_aan(tiny_dims(), 8.0, 11);
  LabeledBatch b = tiny_batch(3, 5);
  b.speaker[1] = 5;
  CHECK_THROWS_AS(aan_loss_and_grads(m, b), ValidationError);
}

TEST_CASE("composite SGD step equals the two-role update") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    AanModel m = build_aan(tiny_dims(), 8.0, 100 + seed);
    const LabeledBatch b = tiny_batch(4, 200 + seed);
    const AanModel expected = oracle::two_role_sgd_step(m, b, 0.05);
    const LossAndGrads lg = aan_loss_and_grads(m, b);
    sgd_step(m.parameters(), lg.grads.spans(), 0.05);
    CHECK(oracle::max_param_diff(m, expected) < 1e-10);
  }
}

TEST_CASE("training with lr = 0 leaves parameters unchanged") {
  const CorpusSplit data = small_desk_data(1);
  const AanModel init = build_aan(AanDims::for_corpus(data.train), 8.0, 12);
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.adam.lr = 0.0;
  const TrainResult r = train(init, data.train, data.valid, cfg);
  CHECK(oracle::max_param_diff(r.model, init) == 0.0);
  REQUIRE(r.history.epochs.size() == 2);
  CHECK(r.history.epochs[0].epoch == 0);
}

TEST_CASE("training is deterministic and records one row per epoch") {
  const CorpusSplit data = small_desk_data(2);
  const AanModel init = build_aan(AanDims::for_corpus(data.train), 8.0, 13);
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.seed = 77;
  const TrainResult a = train(init, data.train, data.valid, cfg);
  const TrainResult b = train(init, data.train, data.valid, cfg);
  CHECK(serialize_model(a.model) == serialize_model(b.model));
  CHECK(history_to_csv(a.history) == history_to_csv(b.history));
  CHECK(a.history.epochs.size() == 6);

  const std::string csv = history_to_csv(a.history);
  CHECK(csv.rfind("epoch,train_l_au,train_l_gender,train_l_accent,train_l_speaker,", 0) == 0);
  CHECK(csv.find("valid_speaker_acc") != std::string::npos);
}

TEST_CASE("selection rule") {
  const CorpusSplit data = small_desk_data(3);
  const AanModel init = build_aan(AanDims::for_corpus(data.train), 8.0, 14);
  TrainConfig cfg;
  cfg.epochs = 6;
  cfg.selection = Selection::BestValidLoss;
  const TrainResult best = train(init, data.train, data.valid, cfg);
  const auto& h = best.history;
  for (const auto& e : h.epochs) CHECK(h.epochs[h.best_epoch].valid.l_au <= e.valid.l_au);

  cfg.selection = Selection::LastEpoch;
  const TrainResult last = train(init, data.train, data.valid, cfg);
  CHECK(last.history.best_epoch == last.history.epochs.size() - 1);
}

TEST_CASE("sgd training runs and is deterministic") {
  const CorpusSplit data = small_desk_data(4);
  const AanModel init = build_aan(AanDims::for_corpus(data.train), 1.0, 15);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.optimizer = OptimizerKind::Sgd;
  cfg.sgd_lr = 0.01;
  CHECK(serialize_model(train(init, data.train, data.valid, cfg).model) ==
        serialize_model(train(init, data.train, data.valid, cfg).model));
}

TEST_CASE("pure autoencoder run: large loss decrease and a monotone trend") {
  RunConfig rc = RunConfig::defaults();
  const CorpusSplit data = prepare_data(rc);
  rc.train.epochs = 200;
  rc.train.selection = Selection::LastEpoch;
  const TrainResult r = train_stage(rc, data, 0.0);
  const auto& h = r.history.epochs;
  REQUIRE(h.size() == 201);
  CHECK(h.back().valid.l_au <= 0.1 * h.front().valid.l_au);

  std::vector<double> avg;
  for (std::size_t i = 1; i + 10 <= h.size(); ++i) {
    double s = 0;
    for (std::size_t j = i; j < i + 10; ++j) s += h[j].train.l_au;
    avg.push_back(s / 10);
  }
  std::size_t rises = 0;
  for (std::size_t i = 1; i < avg.size(); ++i) rises += avg[i] > avg[i - 1];
  CHECK(rises == 0);
}

TEST_CASE("checkpoint round trip and corruption") {
  const AanModel m = build_aan(tiny_dims(), 3.5, 16);
  const std::string bytes = serialize_model(m);
  CHECK(bytes.substr(0, 4) == "AAN1");
  const AanModel back = deserialize_model(bytes);
  CHECK(back.dims == m.dims);
  CHECK(back.lambda == 3.5);
  CHECK(oracle::max_param_diff(back, m) == 0.0);
  CHECK(serialize_model(back) == bytes);

  const std::size_t expected = 4 + 4 + 7 * 8 + 8 + 8 * m.parameter_count();
  CHECK(bytes.size() == expected);

  std::string bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(deserialize_model(bad), ParseError);
  std::string version = bytes;
  version[4] = 2;
  CHECK_THROWS_AS(deserialize_model(version), ParseError);
  CHECK_THROWS_AS(deserialize_model(bytes.substr(0, bytes.size() - 3)), ParseError);
  CHECK_THROWS_AS(deserialize_model(bytes + "x"), ParseError);

  const auto path = std::filesystem::temp_directory_path() / "aan_test_model.aan";
  save_model(m, path);
  CHECK(serialize_model(load_model(path)) == bytes);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_model(path), Error);
}
