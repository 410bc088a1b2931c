#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <sstream>

#include "doctest.h"
#include "fixtures.hpp"
#include "oracles.hpp"
#include "slm/em.hpp"
#include "slm/errors.hpp"

using namespace slm;
using namespace slm::testing;

namespace {

std::vector<std::vector<uint32_t>> tiny_word_corpus(const ModelSet &model,
                                                    size_t max_len = 99) {
  std::vector<std::vector<uint32_t>> out;
  for (const Tree &t : tiny_trees()) {
    std::vector<uint32_t> ids =
        to_word_ids(tree_words(t), model.vocab.words);
    if (ids.size() <= max_len) out.push_back(std::move(ids));
  }
  return out;
}

std::vector<IdDerivation> gold_heldout(const ModelSet &model) {
  std::vector<Tree> all = tiny_trees();
  std::vector<IdDerivation> heldout;
  for (size_t i = 3; i < all.size(); i += 4) {
    auto bin = transform_tree(all[i], tiny_head_rules(),
                              BinarizationRules::default_rules(),
                              model.scheme);
    heldout.push_back(
        to_id_derivation(tree_to_derivation(*bin), model.vocab));
  }
  return heldout;
}

}  // namespace

TEST_CASE("an unambiguous corpus is an EM fixed point") {
  // One tag and no NT labels: every sentence has exactly one parse, so
  // fractional counts reproduce the initialization counts exactly.
  TrainOptions opts;
  opts.vocab_cap = 30;
  opts.heldout_period = 10;
  opts.trigram_equiv = true;
  auto text = synth_corpus(30, 9);
  ModelSet model = train_model_text(text, {}, opts);

  std::vector<std::vector<uint32_t>> sentences;
  std::vector<IdDerivation> heldout;
  size_t idx = 0;
  for (const auto &s : text) {
    if (++idx % 10 != 0) {
      sentences.push_back(to_word_ids(s, model.vocab.words));
    } else {
      // The same flat derivations the initialization held out.
      heldout.push_back(
          to_id_derivation(right_branching_derivation(s, "X"), model.vocab));
    }
  }

  EMConfig cfg;
  cfg.nbest = 1;
  cfg.decode = DecoderOptions::unbounded();
  EMIterationLog log1, log2;
  ModelSet once = em_iteration(model, sentences, heldout, cfg, &log1);
  CHECK(once.predictor.total_events() ==
        doctest::Approx(model.predictor.total_events()).epsilon(1e-12));
  const ExposedHead bos{Vocabulary::kBos, Vocabulary::kBos};
  uint32_t ctx[4];
  size_t n;
  ModelSet::predictor_ctx(model.predictor_mode, bos, bos, ctx, &n);
  for (uint32_t w = 0; w < model.vocab.words.size(); ++w)
    CHECK(once.predictor.count_of(0, {ctx, n}, w) ==
          doctest::Approx(model.predictor.count_of(0, {ctx, n}, w))
              .epsilon(1e-12));
  // And therefore the likelihood is unchanged by another step.
  em_iteration(once, sentences, heldout, cfg, &log2);
  CHECK(log2.loglik == doctest::Approx(log1.loglik).epsilon(1e-12));
}

TEST_CASE("one unpruned N-best step equals the brute-force full EM step") {
  ModelSet model = tiny_model(EnrichScheme::Baseline);
  std::vector<std::vector<uint32_t>> corpus =
      tiny_word_corpus(model, /*max_len=*/3);
  REQUIRE(!corpus.empty());

  EMConfig cfg;
  cfg.nbest = DecoderOptions::kUnbounded;
  cfg.decode = DecoderOptions::unbounded();
  EMIterationLog log;
  ModelSet stepped = em_iteration(model, corpus, gold_heldout(model), cfg,
                                  &log);

  double oracle_ll = 0.0;
  auto expected = oracle_em_expected_counts(model, corpus, &oracle_ll);
  CHECK(log.loglik == doctest::Approx(oracle_ll).epsilon(1e-9));

  double pred_total = 0.0, tag_total = 0.0, op_total = 0.0;
  for (const auto &[key, weight] : expected) {
    const auto &[component, ctx, outcome] = key;
    const DIModel *m = component == 'p'   ? &stepped.predictor
                       : component == 't' ? &stepped.tagger
                                          : &stepped.constructor_model;
    double got = m->count_of(0, {ctx.data(), ctx.size()}, outcome);
    REQUIRE(got == doctest::Approx(weight).epsilon(1e-9));
    (component == 'p'   ? pred_total
     : component == 't' ? tag_total
                        : op_total) += weight;
  }
  // Matching totals pin the tables to exactly the oracle's support.
  CHECK(stepped.predictor.total_events() ==
        doctest::Approx(pred_total).epsilon(1e-9));
  CHECK(stepped.tagger.total_events() ==
        doctest::Approx(tag_total).epsilon(1e-9));
  CHECK(stepped.constructor_model.total_events() ==
        doctest::Approx(op_total).epsilon(1e-9));
}

TEST_CASE("posteriors are conserved: each position contributes weight one") {
  ModelSet model = tiny_model(EnrichScheme::Baseline);
  std::vector<std::vector<uint32_t>> corpus = tiny_word_corpus(model, 3);
  EMConfig cfg;
  cfg.nbest = DecoderOptions::kUnbounded;
  cfg.decode = DecoderOptions::unbounded();
  EMIterationLog log;
  ModelSet stepped = em_iteration(model, corpus, {}, cfg, &log);
  size_t tokens = 0;
  for (const auto &s : corpus) tokens += s.size() + 1;
  CHECK(stepped.predictor.total_events() ==
        doctest::Approx((double)tokens).epsilon(1e-9));
  CHECK(log.tokens == tokens);
}

TEST_CASE("training log-likelihood is non-decreasing over three iterations") {
  ModelSet model = tiny_model(EnrichScheme::Baseline);
  std::vector<std::vector<uint32_t>> corpus = tiny_word_corpus(model);
  EMConfig cfg;
  cfg.decode.beam = 16;
  std::vector<double> ll;
  ModelSet current = std::move(model);
  for (int it = 0; it < 3; ++it) {
    EMIterationLog log;
    current = em_iteration(current, corpus, gold_heldout(current), cfg, &log);
    ll.push_back(log.loglik);
  }
  for (size_t i = 1; i < ll.size(); ++i)
    CHECK(ll[i] >= ll[i - 1] - 1e-6 * std::abs(ll[i - 1]));
}

TEST_CASE("a truncated N-best list renormalizes its posteriors") {
  ModelSet model = tiny_model(EnrichScheme::Baseline);
  std::vector<std::vector<uint32_t>> corpus = tiny_word_corpus(model, 2);
  EMConfig cfg;
  cfg.nbest = 2;
  cfg.decode = DecoderOptions::unbounded();
  EMIterationLog log;
  ModelSet stepped = em_iteration(model, corpus, {}, cfg, &log);
  size_t tokens = 0;
  for (const auto &s : corpus) tokens += s.size() + 1;
  // Weight one per position even though parses were dropped.
  CHECK(stepped.predictor.total_events() ==
        doctest::Approx((double)tokens).epsilon(1e-9));
}

TEST_CASE("serialization is stable across a read-write cycle") {
  // iterations = 0 reduces to checkpointing the input model unchanged.
  ModelSet model = tiny_model(EnrichScheme::Same);
  std::ostringstream first;
  model.write(first);
  std::istringstream in(first.str());
  ModelSet back = ModelSet::read(in);
  std::ostringstream second;
  back.write(second);
  CHECK(second.str() == first.str());
}

TEST_CASE("EM runs are deterministic, including across thread counts") {
  ModelSet model = tiny_model(EnrichScheme::Baseline);
  std::vector<std::vector<uint32_t>> corpus = tiny_word_corpus(model);
  EMConfig cfg;
  cfg.decode.beam = 8;
  EMIterationLog l1, l2, l3;
  ModelSet a = em_iteration(model, corpus, gold_heldout(model), cfg, &l1);
  ModelSet b = em_iteration(model, corpus, gold_heldout(model), cfg, &l2);
  cfg.threads = 3;
  ModelSet c = em_iteration(model, corpus, gold_heldout(model), cfg, &l3);
  CHECK(l1.loglik == l2.loglik);
  CHECK(l1.loglik == l3.loglik);
  std::ostringstream sa, sb, sc;
  a.write(sa);
  b.write(sb);
  c.write(sc);
  CHECK(sa.str() == sb.str());
  CHECK(sa.str() == sc.str());
}
