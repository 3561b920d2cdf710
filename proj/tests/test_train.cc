#include <cmath>
#include <random>
#include <set>
#include <vector>

#include "doctest.h"
#include "ocoref/train.h"
#include "support.h"

namespace ocoref {
namespace {

using testing::mention;

double sigmoid_value(double x) { return 1.0 / (1.0 + std::exp(-x)); }

CandidatePool chain_pool(int n) {
  CandidatePool pool;
  for (int j = 0; j < n; ++j) {
    PoolEntry e;
    e.candidate.address = mention(0, j, j);
    pool.entries.push_back(e);
  }
  return pool;
}

std::vector<Dialogue> small_corpus(std::uint64_t seed, int n) {
  GenSpec spec;
  spec.seed = seed;
  spec.num_dialogues = n;
  spec.min_utterances = 3;
  spec.max_utterances = 5;
  return generate_synthetic(spec);
}

CorefModel small_model(Variant v, std::span<const Dialogue> corpus) {
  return CorefModel(testing::tiny_config(v), Vocab::build(corpus, 16), 7);
}

TEST_SUITE("train") {

TEST_CASE("coref loss examples") {
  Tape tape;
  SUBCASE("only the dummy") {
    const CandidatePool pool = chain_pool(1);
    const AntecedentPairs pairs = antecedent_pairs(pool, 5);
    Var l = coref_loss(tape, tape.constant(Matrix(0, 1)), pairs, {});
    CHECK(l.scalar() == 0.0);
  }
  SUBCASE("one antecedent at score zero") {
    const CandidatePool pool = chain_pool(2);
    const AntecedentPairs pairs = antecedent_pairs(pool, 5);
    Var l = coref_loss(tape, tape.constant(Matrix(1, 1)), pairs, {true});
    CHECK(l.scalar() == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  }
}

TEST_CASE("coref loss against direct summation") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 2.0);
  for (int trial = 0; trial < 50; ++trial) {
    const CandidatePool pool = chain_pool(4);
    const AntecedentPairs pairs = antecedent_pairs(pool, 3);
    Matrix scores(pairs.size(), 1);
    std::vector<bool> gold(pairs.size());
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      scores[p] = n(rng);
      gold[p] = rng() % 3 == 0;
    }
    double expected = 0.0;
    for (std::size_t j = 0; j + 1 < pairs.row_begin.size(); ++j) {
      double all = 1.0, good = 0.0;
      bool any = false;
      for (std::size_t p = pairs.row_begin[j]; p < pairs.row_begin[j + 1]; ++p) {
        all += std::exp(scores[p]);
        if (gold[p]) {
          good += std::exp(scores[p]);
          any = true;
        }
      }
      if (!any) good = 1.0;
      expected += -std::log(good / all);
    }
    Tape tape;
    CHECK(coref_loss(tape, tape.constant(scores), pairs, gold).scalar() ==
          doctest::Approx(expected).epsilon(1e-10));
  }
}

TEST_CASE("bce examples") {
  Tape tape;
  const std::vector<std::size_t> pos{0}, neg{1}, none;
  BceLoss l = bce_loss(tape, tape.constant(Matrix(2, 1)), pos, neg);
  CHECK(l.loss.scalar() == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK_FALSE(l.empty);
  CHECK_FALSE(l.one_sided);

  l = bce_loss(tape, tape.constant(Matrix(2, 1, {60.0, -60.0})), pos, neg);
  CHECK(l.loss.scalar() < 1e-20);

  l = bce_loss(tape, tape.constant(Matrix(2, 1)), none, neg);
  CHECK(l.one_sided);
  CHECK(l.loss.scalar() == doctest::Approx(std::log(2.0)));

  l = bce_loss(tape, tape.constant(Matrix(2, 1)), none, none);
  CHECK(l.empty);
  CHECK(l.loss.scalar() == 0.0);
}

TEST_CASE("bce against a hand computation") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0.0, 3.0);
  Matrix scores(7, 1);
  for (double& v : scores.values()) v = n(rng);
  const std::vector<std::size_t> pos{0, 3, 4}, neg{1, 2, 6};
  double expected = 0.0;
  for (std::size_t p : pos) expected -= std::log(sigmoid_value(scores[p]));
  for (std::size_t q : neg) expected -= std::log(1.0 - sigmoid_value(scores[q]));
  expected /= 6.0;
  Tape tape;
  CHECK(bce_loss(tape, tape.constant(scores), pos, neg).loss.scalar() ==
        doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("total loss") {
  CHECK(total_loss(2.0, 1.0, 3.0, LossWeights{}) == doctest::Approx(2.4));
  CHECK(total_loss(2.0, 1.0, 3.0, LossWeights{1.0, 0.0, 0.0}) == 2.0);
  CHECK(total_loss(0.0, 0.0, 0.0, LossWeights{}) == 0.0);
  Tape tape;
  Var t = total_loss(tape.constant(Matrix(1, 1, 2.0)), tape.constant(Matrix(1, 1, 1.0)),
                     tape.constant(Matrix(1, 1, 3.0)), LossWeights{});
  CHECK(t.scalar() == doctest::Approx(2.4));

  const LossWeights bl = effective_weights(LossWeights{}, Variant::kBL);
  CHECK(bl.mention == 0.0);
  CHECK(bl.speaker == 0.0);
  const LossWeights sr = effective_weights(LossWeights{}, Variant::kSR);
  CHECK(sr.mention == 0.1);
  CHECK(sr.speaker == 0.0);
  CHECK(effective_weights(LossWeights{}, Variant::kORSG).speaker == 0.1);
}

TEST_CASE("negative sampling") {
  std::vector<std::size_t> pool(100);
  for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = 2 * i;
  std::mt19937_64 a(5), b(5);
  const auto s1 = sample_negatives(5, pool, a);
  const auto s2 = sample_negatives(5, pool, b);
  CHECK(s1.size() == 5);
  CHECK(s1 == s2);
  CHECK(std::is_sorted(s1.begin(), s1.end()));
  CHECK(std::set<std::size_t>(s1.begin(), s1.end()).size() == 5);
  for (std::size_t v : s1) CHECK(v % 2 == 0);
  const auto s3 = sample_negatives(5, pool, a);
  CHECK(s3 != s1);
  const std::vector<std::size_t> small{1, 4, 9};
  CHECK(sample_negatives(5, small, a) == small);
}

TEST_CASE("zero learning rate leaves parameters unchanged") {
  const auto corpus = small_corpus(3, 1);
  for (Variant v : {Variant::kSR, Variant::kORSGSA}) {
    CorefModel model = small_model(v, corpus);
    const std::string before = serialize_checkpoint(model.params(), "{}");
    TrainConfig config;
    config.lr_encoder = 0.0;
    config.lr_task = 0.0;
    config.epochs = 1;
    Trainer trainer(model, config);
    trainer.train(corpus);
    CHECK(trainer.updates() > 0);
    CHECK(serialize_checkpoint(model.params(), "{}") == before);
  }
}

TEST_CASE("update count follows accumulation") {
  const auto corpus = small_corpus(4, 7);
  int turns = 0;
  for (const Dialogue& d : corpus) turns += static_cast<int>(d.utterances.size());
  CorefModel model = small_model(Variant::kOR, corpus);
  TrainConfig config;
  config.epochs = 1;
  Trainer trainer(model, config);
  const auto stats = trainer.train(corpus);
  REQUIRE(stats.size() == 1);
  CHECK(stats[0].steps == turns);
  CHECK(stats[0].updates == (turns + 15) / 16);
  CHECK(trainer.pending() == 0);
}

TEST_CASE("training is deterministic per seed") {
  const auto corpus = small_corpus(5, 3);
  std::string ckpt[2];
  for (std::string& out : ckpt) {
    CorefModel model = small_model(Variant::kORSG, corpus);
    TrainConfig config;
    config.epochs = 2;
    config.seed = 21;
    Trainer(model, config).train(corpus);
    out = serialize_checkpoint(model.params(), "{}");
  }
  CHECK(ckpt[0] == ckpt[1]);
}

TEST_CASE("warm start restores parameters exactly") {
  const auto corpus = small_corpus(6, 2);
  CorefModel sr = small_model(Variant::kSR, corpus);
  TrainConfig config;
  config.epochs = 1;
  Trainer(sr, config).train(corpus);
  testing::TempDir dir;
  sr.save(dir.file("sr.json"));
  CorefModel loaded = CorefModel::load(dir.file("sr.json"));
  loaded.set_variant(Variant::kOR);
  for (std::size_t i = 0; i < sr.params().size(); ++i) {
    CHECK(loaded.params()[i].name == sr.params()[i].name);
    CHECK(loaded.params()[i].value == sr.params()[i].value);
  }
  CorefModel fresh = small_model(Variant::kOR, corpus);
  restore_parameters(fresh.params(), load_checkpoint(dir.file("sr.json")));
  for (std::size_t i = 0; i < sr.params().size(); ++i) {
    CHECK(fresh.params()[i].value == sr.params()[i].value);
  }
}

TEST_CASE("teacher forcing scope") {
  const auto corpus = small_corpus(8, 4);
  CorefModel model = small_model(Variant::kORSGSA, corpus);
  TrainConfig config;
  config.epochs = 1;
  config.shuffle = false;
  Trainer trainer(model, config);
  int seen = 0;
  trainer.observer = [&](const LossScope& scope) {
    ++seen;
    REQUIRE(scope.turn >= 0);
    const Dialogue& d = corpus[scope.dialogue];
    const GoldIndex gold(d);
    std::vector<MentionAddress> expected;
    for (const auto& [m, c] : gold.range(scope.window_start, scope.turn - 1)) {
      expected.push_back(m);
    }
    CHECK(scope.carried == expected);
    for (const MentionAddress& m : scope.candidates) CHECK(m.utterance == scope.turn);
    for (const MentionAddress& m : scope.mention_spans) CHECK(m.utterance == scope.turn);
  };
  trainer.train(corpus);
  CHECK(seen > 0);
}

TEST_CASE("document mode covers whole dialogues") {
  const auto corpus = small_corpus(9, 2);
  CorefModel model = small_model(Variant::kSR, corpus);
  TrainConfig config;
  config.epochs = 1;
  Trainer trainer(model, config);
  int seen = 0;
  trainer.observer = [&](const LossScope& scope) {
    ++seen;
    CHECK(scope.turn == -1);
    CHECK(scope.carried.empty());
  };
  const auto stats = trainer.train(corpus);
  CHECK(seen == 2);
  CHECK(stats[0].steps == 2);
  CHECK(stats[0].mean.total >= 0.0);
}

TEST_CASE("SR learns mention detection") {
  const auto corpus = small_corpus(10, 30);
  CorefModel model = small_model(Variant::kSR, corpus);
  TrainConfig config;
  config.epochs = 5;
  config.lr_encoder = 0.1;
  config.lr_task = 0.1;
  config.dropout = 0.0;
  config.weights.mention = 1.0;
  config.accumulation = 1;
  const double before = mention_accuracy(model, corpus);
  Trainer(model, config).train(corpus);
  const double after = mention_accuracy(model, corpus);
  CHECK(after > 0.55);
  CHECK(after > before);
}

TEST_CASE("composite objective gradient") {
  GenSpec spec;
  spec.seed = 1;
  spec.num_dialogues = 1;
  spec.min_utterances = 3;
  spec.max_utterances = 4;
  spec.min_fillers = 2;
  spec.max_fillers = 3;
  const auto corpus = generate_synthetic(spec);
  const Dialogue& d = corpus[0];
  for (Variant v : {Variant::kORSGSA, Variant::kSR}) {
    CorefModel model(testing::tiny_config(v, 4), Vocab::build(corpus, 16), 0);
    std::vector<Parameter*> ps = model.params().all();
    const auto report = grad_check(
        testing::composite_loss(model, d, static_cast<int>(d.utterances.size()) - 1, 0),
        ps, 1e-5, 1e-4);
    CHECK(report.passed());
  }
}

}  // TEST_SUITE

}  // namespace
}  // namespace ocoref
