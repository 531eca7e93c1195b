#include <doctest.h>

#include "aan/anonymizer.hpp"
#include "aan/asv_eval.hpp"
#include "aan/pipeline.hpp"
#include "desk.hpp"

using namespace aan;

TEST_CASE("the default run config is the pinned desk run") {
  CHECK(RunConfig::defaults().seed == kDeskSeed);
}

// Properties of a model trained with the default desk configuration (lambda 8).
TEST_CASE("trained desk model") {
  RunConfig c = RunConfig::defaults();
  c.seed = kDeskSeed;
  const CorpusSplit data = prepare_data(c);
  const TrainResult r = train_stage(c, data);
  REQUIRE_FALSE(r.history.diverged);

  SUBCASE("speaker head is held near chance") {
    const double chance = 1.0 / static_cast<double>(data.train.speaker_vocab.size());
    CHECK(r.history.epochs.back().valid_speaker_acc <= 2 * chance);
  }
  SUBCASE("aan1 never reproduces its input exactly") {
    std::size_t below = 0;
    for (const auto& e : data.test.embeddings)
      if (cosine_score(e.vector, anonymize_aan1(r.model, e.vector)) < 1.0) ++below;
    CHECK(static_cast<double>(below) >= 0.99 * static_cast<double>(data.test.size()));
  }
  SUBCASE("aan1 is not idempotent") {
    const Vector& x = data.test.embeddings.front().vector;
    const Vector once = anonymize_aan1(r.model, x);
    CHECK((anonymize_aan1(r.model, once) - once).norm() > 0.0);
  }
}
