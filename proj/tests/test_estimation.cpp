#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "doctest.h"
#include "fixtures.hpp"
#include "oracles.hpp"
#include "slm/errors.hpp"
#include "slm/model_set.hpp"

using namespace slm;
using namespace slm::testing;

namespace {

IdDerivation two_leaf_derivation(VocabSet *vocab_out) {
  auto trees = read_trees_from_string("(X (A a) (B b))");
  clean_tree(trees[0]);
  auto bin = transform_tree(trees[0], tiny_head_rules(),
                            BinarizationRules::default_rules(),
                            EnrichScheme::Baseline);
  std::vector<const BinNode *> ptr = {bin.get()};
  Vocabulary words = build_word_vocab(trees, 100);
  *vocab_out = build_vocab_set(ptr, words);
  return to_id_derivation(tree_to_derivation(*bin), *vocab_out);
}

std::vector<RawEvent> to_raw(const std::vector<DIModel::HeldoutEvent> &evs) {
  std::vector<RawEvent> out;
  for (const auto &e : evs) {
    RawEvent r;
    r.ctx.assign(e.ctx.f.begin(), e.ctx.f.begin() + e.ctx.n);
    r.outcome = e.outcome;
    out.push_back(std::move(r));
  }
  return out;
}

// The toy training split exactly as train_model makes it (period 4).
void tiny_split(std::vector<Tree> *train, std::vector<Tree> *heldout) {
  std::vector<Tree> all = tiny_trees();
  for (size_t i = 0; i < all.size(); ++i) {
    if ((i + 1) % 4 == 0)
      heldout->push_back(all[i]);
    else
      train->push_back(all[i]);
  }
}

}  // namespace

TEST_CASE("accumulate counts the hand-simulated two-leaf events") {
  VocabSet vocab;
  IdDerivation d = two_leaf_derivation(&vocab);
  ComponentCounts counts(vocab, PredictorMode::Full);
  counts.accumulate(d);
  counts.predictor.finalize();
  counts.tagger.finalize();
  counts.constructor_model.finalize();

  const uint32_t a = vocab.words.id("a"), b = vocab.words.id("b");
  const uint32_t A = vocab.labels.id("A"), B = vocab.labels.id("B");
  const uint32_t X = vocab.labels.id("X");
  const ExposedHead bos{Vocabulary::kBos, Vocabulary::kBos};

  uint32_t ctx[4];
  size_t n;
  // Predictor: (<s>, pad) -> a.
  ModelSet::predictor_ctx(PredictorMode::Full, bos, bos, ctx, &n);
  CHECK(counts.predictor.count_of(0, {ctx, n}, a) == doctest::Approx(1.0));
  // Predictor: ((a, A), (<s>)) -> b.
  ModelSet::predictor_ctx(PredictorMode::Full, {a, A}, bos, ctx, &n);
  CHECK(counts.predictor.count_of(0, {ctx, n}, b) == doctest::Approx(1.0));
  // Sentence-end event from ((b, X), (<s>)).
  ModelSet::predictor_ctx(PredictorMode::Full, {b, X}, bos, ctx, &n);
  CHECK(counts.predictor.count_of(0, {ctx, n}, Vocabulary::kEos) ==
        doctest::Approx(1.0));
  CHECK(counts.predictor.total_events() == doctest::Approx(3.0));

  // Tagger: a -> A at the start, b -> B under ((a,A), <s>).
  ModelSet::tagger_ctx(a, bos, bos, ctx, &n);
  CHECK(counts.tagger.count_of(0, {ctx, n}, A) == doctest::Approx(1.0));
  ModelSet::tagger_ctx(b, {a, A}, bos, ctx, &n);
  CHECK(counts.tagger.count_of(0, {ctx, n}, B) == doctest::Approx(1.0));

  // Constructor: adjoin-right(X) under ((b,B),(a,A)), then the closing
  // null under ((b,X), <s>).
  uint32_t adjr = vocab.op_id(OpKind::AdjoinRight, X);
  ModelSet::predictor_ctx(PredictorMode::Full, {b, B}, {a, A}, ctx, &n);
  CHECK(counts.constructor_model.count_of(0, {ctx, n}, adjr) ==
        doctest::Approx(1.0));
  ModelSet::predictor_ctx(PredictorMode::Full, {b, X}, bos, ctx, &n);
  CHECK(counts.constructor_model.count_of(0, {ctx, n}, 0) ==
        doctest::Approx(1.0));
  CHECK(counts.constructor_model.total_events() == doctest::Approx(3.0));
}

TEST_CASE("empty corpus leaves every table empty and the floor uniform") {
  VocabSet vocab;
  two_leaf_derivation(&vocab);
  ComponentCounts counts(vocab, PredictorMode::Full);
  counts.predictor.finalize();
  CHECK(counts.predictor.total_events() == 0.0);
  const ExposedHead bos{Vocabulary::kBos, Vocabulary::kBos};
  uint32_t ctx[4];
  size_t n;
  ModelSet::predictor_ctx(PredictorMode::Full, bos, bos, ctx, &n);
  for (uint32_t w = 0; w < vocab.words.size(); ++w)
    CHECK(counts.predictor.prob({ctx, n}, w) ==
          doctest::Approx(1.0 / vocab.words.size()).epsilon(1e-12));
}

TEST_CASE("counting a sentence twice doubles every count") {
  VocabSet vocab;
  IdDerivation d = two_leaf_derivation(&vocab);
  ComponentCounts once(vocab, PredictorMode::Full);
  once.accumulate(d);
  ComponentCounts twice(vocab, PredictorMode::Full);
  twice.accumulate(d);
  twice.accumulate(d);
  once.predictor.finalize();
  twice.predictor.finalize();
  const ExposedHead bos{Vocabulary::kBos, Vocabulary::kBos};
  uint32_t ctx[4];
  size_t n;
  ModelSet::predictor_ctx(PredictorMode::Full, bos, bos, ctx, &n);
  uint32_t a = vocab.words.id("a");
  CHECK(twice.predictor.count_of(0, {ctx, n}, a) ==
        doctest::Approx(2.0 * once.predictor.count_of(0, {ctx, n}, a)));
  CHECK(twice.predictor.total_events() ==
        doctest::Approx(2.0 * once.predictor.total_events()));
}

TEST_CASE("shard merging equals weighted accumulation") {
  VocabSet vocab;
  IdDerivation d = two_leaf_derivation(&vocab);
  ComponentCounts shard1(vocab, PredictorMode::Full);
  ComponentCounts shard2(vocab, PredictorMode::Full);
  shard1.accumulate(d);
  shard2.accumulate(d, 0.5);
  shard1.merge_from(shard2);
  shard1.predictor.finalize();
  CHECK(shard1.predictor.total_events() == doctest::Approx(4.5));
}

TEST_CASE("derivations that break the stack discipline are rejected") {
  VocabSet vocab;
  IdDerivation d = two_leaf_derivation(&vocab);
  // Make the first position adjoin with nothing underneath.
  d.steps[0].ops.insert(d.steps[0].ops.begin(),
                        IdOp{OpKind::AdjoinLeft, vocab.labels.id("X")});
  ComponentCounts counts(vocab, PredictorMode::Full);
  CHECK_THROWS_AS(counts.accumulate(d), DataError);
}

TEST_CASE("weight EM favors the specific level when heldout matches") {
  DIModel m({"c"}, 10);
  uint32_t ctx[1] = {5};
  m.add({ctx, 1}, 1, 3.0);
  m.add({ctx, 1}, 2, 1.0);
  m.finalize();
  std::vector<DIModel::HeldoutEvent> heldout;
  for (int i = 0; i < 4; ++i) {
    DIModel::HeldoutEvent e;
    e.ctx = CtxKey({ctx, 1}, 1);
    e.outcome = i < 3 ? 1 : 2;
    heldout.push_back(e);
  }
  auto est = m.estimate_weights(heldout);
  CHECK_FALSE(est.fallback_fixed);
  size_t bucket = DIModel::bucket_of(4.0);
  CHECK(m.lambdas(0).at(bucket) > 0.5);
}

TEST_CASE("heldout likelihood is non-decreasing across EM steps") {
  DIModel m({"c", "d"}, 6);
  std::mt19937 rng(11);
  for (int i = 0; i < 60; ++i) {
    uint32_t ctx[2] = {(uint32_t)(rng() % 3), (uint32_t)(rng() % 2)};
    m.add({ctx, 2}, (uint32_t)(rng() % 6), 1.0);
  }
  m.finalize();
  std::vector<DIModel::HeldoutEvent> heldout;
  for (int i = 0; i < 30; ++i) {
    DIModel::HeldoutEvent e;
    uint32_t ctx[2] = {(uint32_t)(rng() % 3), (uint32_t)(rng() % 2)};
    e.ctx = CtxKey({ctx, 2}, 2);
    e.outcome = (uint32_t)(rng() % 6);
    heldout.push_back(e);
  }
  double prev = -std::numeric_limits<double>::infinity();
  for (int step = 0; step < 8; ++step) {
    auto est = m.estimate_weights(heldout, 0.0, 1);
    CHECK(est.heldout_loglik >= prev - 1e-9);
    prev = est.heldout_loglik;
  }
}

TEST_CASE("empty heldout falls back to fixed weights") {
  DIModel m({"c"}, 4);
  uint32_t ctx[1] = {1};
  m.add({ctx, 1}, 0, 2.0);
  m.finalize();
  auto est = m.estimate_weights({});
  CHECK(est.fallback_fixed);
  for (double l : m.lambdas(0)) CHECK(l == doctest::Approx(0.5));
}

TEST_CASE("an empty model gives exactly the uniform floor") {
  DIModel m({"c", "d"}, 8);
  m.finalize();
  uint32_t ctx[2] = {42, 7};
  CHECK(m.prob({ctx, 2}, 3) == 1.0 / 8);
}

TEST_CASE("single-event dominance") {
  VocabSet vocab;
  IdDerivation d = two_leaf_derivation(&vocab);
  ComponentCounts counts(vocab, PredictorMode::Full);
  counts.accumulate(d);
  counts.predictor.finalize();
  counts.predictor.set_fixed_lambdas(0.5);
  const ExposedHead bos{Vocabulary::kBos, Vocabulary::kBos};
  uint32_t ctx[4];
  size_t n;
  ModelSet::predictor_ctx(PredictorMode::Full, bos, bos, ctx, &n);
  uint32_t a = vocab.words.id("a");
  double pa = counts.predictor.prob({ctx, n}, a);
  for (uint32_t w = 0; w < vocab.words.size(); ++w)
    if (w != a) CHECK(pa > counts.predictor.prob({ctx, n}, w));
}

TEST_CASE("component probabilities match the brute-force calculator") {
  std::vector<Tree> train_trees, heldout_trees;
  tiny_split(&train_trees, &heldout_trees);
  TrainOptions opts;
  opts.vocab_cap = 100;
  opts.heldout_period = 4;
  ModelSet model = train_model(tiny_trees(), {}, tiny_head_rules(),
                               BinarizationRules::default_rules(), opts);

  // Raw training events, listed independently of the count tables.
  ComponentCounts lister(model.vocab, PredictorMode::Full);
  ComponentCounts::HeldoutEvents train_events;
  for (const Tree &t : train_trees) {
    auto bin = transform_tree(t, tiny_head_rules(),
                              BinarizationRules::default_rules(),
                              EnrichScheme::Baseline);
    lister.extract_heldout(
        to_id_derivation(tree_to_derivation(*bin), model.vocab),
        train_events);
  }
  auto raw_pred = to_raw(train_events.predictor);
  auto raw_tag = to_raw(train_events.tagger);
  auto raw_op = to_raw(train_events.constructor_ev);

  for (const RawEvent &q : raw_pred) {
    double got = model.predictor.prob({q.ctx.data(), q.ctx.size()}, q.outcome);
    double want = oracle_di_prob(raw_pred, model.predictor, 4,
                                 (uint32_t)model.vocab.words.size(), q.ctx,
                                 q.outcome);
    REQUIRE(got == doctest::Approx(want).epsilon(1e-10));
  }
  for (const RawEvent &q : raw_tag) {
    double got = model.tagger.prob({q.ctx.data(), q.ctx.size()}, q.outcome);
    double want = oracle_di_prob(raw_tag, model.tagger, 3,
                                 (uint32_t)model.vocab.tag_ids.size(), q.ctx,
                                 q.outcome);
    REQUIRE(got == doctest::Approx(want).epsilon(1e-10));
  }
  for (const RawEvent &q : raw_op) {
    double got =
        model.constructor_model.prob({q.ctx.data(), q.ctx.size()}, q.outcome);
    double want = oracle_di_prob(raw_op, model.constructor_model, 4,
                                 (uint32_t)model.vocab.op_count(), q.ctx,
                                 q.outcome);
    REQUIRE(got == doctest::Approx(want).epsilon(1e-10));
  }
  // An entirely unseen context backs off the same way in both routes.
  std::vector<uint32_t> unseen = {99, 98, 97, 96};
  CHECK(model.predictor.prob({unseen.data(), 4}, 0) ==
        doctest::Approx(oracle_di_prob(raw_pred, model.predictor, 4,
                                       (uint32_t)model.vocab.words.size(),
                                       unseen, 0))
            .epsilon(1e-10));
}

TEST_CASE("trigram matches its brute-force oracle to 1e-12") {
  auto corpus = synth_corpus(60, 17);
  TrainOptions opts;
  opts.vocab_cap = 30;
  opts.heldout_period = 10;
  ModelSet model = train_model_text(corpus, {}, opts);

  // Independent event listing with double <s> padding.
  std::vector<RawEvent> events;
  size_t idx = 0;
  for (const auto &sent : corpus) {
    bool heldout = (++idx) % 10 == 0;
    if (heldout) continue;
    uint32_t w2 = Vocabulary::kBos, w1 = Vocabulary::kBos;
    std::vector<uint32_t> ids = to_word_ids(sent, model.vocab.words);
    for (size_t k = 0; k <= ids.size(); ++k) {
      uint32_t w = k < ids.size() ? ids[k] : Vocabulary::kEos;
      events.push_back({{w1, w2}, w, 1.0});
      w2 = w1;
      w1 = w;
    }
  }
  std::mt19937 rng(3);
  for (int i = 0; i < 200; ++i) {
    const RawEvent &q = events[rng() % events.size()];
    double got = model.p_trigram(q.ctx[1], q.ctx[0], q.outcome);
    double want = oracle_di_prob(events, model.trigram, 2,
                                 (uint32_t)model.vocab.words.size(), q.ctx,
                                 q.outcome);
    REQUIRE(got == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("trigram dominance and uniform floor") {
  TrainOptions opts;
  opts.vocab_cap = 30;
  std::vector<std::vector<std::string>> abc(10, {"a", "b", "c"});
  ModelSet m2 = train_model_text(abc, {}, opts);
  uint32_t a = m2.vocab.words.id("a"), b = m2.vocab.words.id("b"),
           c = m2.vocab.words.id("c");
  for (uint32_t w = 0; w < m2.vocab.words.size(); ++w)
    if (w != c) CHECK(m2.p_trigram(a, b, c) > m2.p_trigram(a, b, w));

  VocabSet vocab;
  vocab.words.add("x");
  TrigramCounts empty((uint32_t)vocab.words.size());
  empty.model.finalize();
  uint32_t cx[2] = {0, 0};
  CHECK(empty.model.prob({cx, 2}, 1) == 1.0 / vocab.words.size());
}

TEST_CASE("normalization: each component sums to one over its outcomes") {
  ModelSet model = tiny_model(EnrichScheme::Opposite);
  const ExposedHead bos{Vocabulary::kBos, Vocabulary::kBos};
  ExposedHead h0{model.vocab.words.id("a"), model.vocab.labels.id("A")};
  ExposedHead h1{model.vocab.words.id("b"), model.vocab.labels.id("B")};
  std::vector<std::pair<ExposedHead, ExposedHead>> contexts = {
      {bos, bos}, {h0, bos}, {h0, h1}};
  for (const auto &[c0, c1] : contexts) {
    double sw = 0.0;
    for (uint32_t w = 0; w < model.vocab.words.size(); ++w)
      sw += model.p_word(c0, c1, w);
    CHECK(sw == doctest::Approx(1.0).epsilon(1e-9));
    double st = 0.0;
    for (uint32_t t : model.vocab.tag_ids) st += model.p_tag(c0.word, c0, c1, t);
    CHECK(st == doctest::Approx(1.0).epsilon(1e-9));
    double so = 0.0;
    for (uint32_t op = 0; op < model.vocab.op_count(); ++op)
      so += model.p_op(c0, c1, op);
    CHECK(so == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("positivity floor derived from the weights") {
  ModelSet model = tiny_model();
  double shrink = 1.0;
  for (size_t lvl = 0; lvl < model.predictor.num_levels(); ++lvl) {
    double mx = 0.0;
    for (double l : model.predictor.lambdas(lvl)) mx = std::max(mx, l);
    shrink *= (1.0 - mx);
  }
  double bound = shrink / model.vocab.words.size();
  CHECK(bound > 0.0);
  const ExposedHead bos{Vocabulary::kBos, Vocabulary::kBos};
  for (uint32_t w = 0; w < model.vocab.words.size(); ++w)
    CHECK(model.p_word(bos, bos, w) >= bound);
}

TEST_CASE("adding an observation never decreases its probability") {
  for (double before : {0.0, 1.0, 3.0}) {
    DIModel base({"c", "d"}, 8);
    DIModel more({"c", "d"}, 8);
    uint32_t ctx[2] = {1, 2};
    if (before > 0) {
      base.add({ctx, 2}, 3, before);
      more.add({ctx, 2}, 3, before);
    }
    uint32_t other[2] = {1, 4};
    base.add({other, 2}, 5, 1.0);
    more.add({other, 2}, 5, 1.0);
    more.add({ctx, 2}, 3, 1.0);
    base.finalize();
    more.finalize();
    base.set_fixed_lambdas(0.5);
    more.set_fixed_lambdas(0.5);
    CHECK(more.prob({ctx, 2}, 3) >= base.prob({ctx, 2}, 3));
  }
}

TEST_CASE("training is deterministic and the model round-trips") {
  ModelSet m1 = tiny_model(EnrichScheme::Same);
  ModelSet m2 = tiny_model(EnrichScheme::Same);
  std::ostringstream s1, s2;
  m1.write(s1);
  m2.write(s2);
  CHECK(s1.str() == s2.str());

  std::istringstream in(s1.str());
  ModelSet back = ModelSet::read(in);
  std::ostringstream s3;
  back.write(s3);
  CHECK(s3.str() == s1.str());

  const ExposedHead bos{Vocabulary::kBos, Vocabulary::kBos};
  for (uint32_t w = 0; w < m1.vocab.words.size(); ++w)
    CHECK(back.p_word(bos, bos, w) == m1.p_word(bos, bos, w));
}

TEST_CASE("missing heldout training reports the fixed-weight fallback") {
  TrainOptions opts;
  opts.vocab_cap = 100;
  opts.heldout_period = 0;
  TrainReport rep;
  train_model(tiny_trees(), {}, tiny_head_rules(),
              BinarizationRules::default_rules(), opts, &rep);
  CHECK(rep.fixed_weight_fallback);
  CHECK(rep.warnings.size() == 1);
}

TEST_CASE("empty training corpus is an error") {
  TrainOptions opts;
  CHECK_THROWS_AS(train_model({}, {}, tiny_head_rules(),
                              BinarizationRules::default_rules(), opts),
                  DataError);
}

TEST_CASE("model lifecycle misuse is rejected") {
  DIModel m({"c"}, 4);
  uint32_t ctx[1] = {1};
  CHECK_THROWS_AS(m.prob({ctx, 1}, 0), DataError);  // not finalized yet
  m.add({ctx, 1}, 0, 1.0);
  uint32_t bad[2] = {1, 2};
  CHECK_THROWS_AS(m.add({bad, 2}, 0, 1.0), DataError);  // arity mismatch
  m.finalize();
  CHECK_THROWS_AS(m.add({ctx, 1}, 0, 1.0), DataError);  // frozen
  CHECK_THROWS_AS(m.prob({bad, 2}, 0), DataError);
}

TEST_CASE("fractional-count models round-trip through serialization") {
  VocabSet vocab;
  IdDerivation d = two_leaf_derivation(&vocab);
  ComponentCounts counts(vocab, PredictorMode::Full);
  counts.accumulate(d, 0.125);
  counts.accumulate(d, 1.0 / 3.0);  // not representable in decimal
  counts.predictor.finalize();
  std::ostringstream first;
  counts.predictor.write(first, "predictor");
  std::istringstream in(first.str());
  DIModel back = DIModel::read(in);
  std::ostringstream second;
  back.write(second, "predictor");
  CHECK(second.str() == first.str());
  const ExposedHead bos{Vocabulary::kBos, Vocabulary::kBos};
  uint32_t ctx[4];
  size_t n;
  ModelSet::predictor_ctx(PredictorMode::Full, bos, bos, ctx, &n);
  CHECK(back.count_of(0, {ctx, n}, vocab.words.id("a")) ==
        0.125 + 1.0 / 3.0);
}
