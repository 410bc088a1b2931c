#include "slm/em.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "slm/errors.hpp"

namespace slm {

namespace {

struct SentenceEvidence {
  std::vector<std::pair<IdDerivation, double>> parses;  // derivation, rho
  double loglik = 0.0;  // ln sum over retained parses of P(W, T)
  bool failed = false;
};

}  // namespace

ModelSet em_iteration(const ModelSet &model,
                      const std::vector<std::vector<uint32_t>> &sentences,
                      const std::vector<IdDerivation> &heldout,
                      const EMConfig &cfg, EMIterationLog *log) {
  DecoderOptions dopts = cfg.decode;
  dopts.recombine = false;  // each hypothesis is a single parse
  const size_t nbest = cfg.nbest > 0 ? cfg.nbest : dopts.beam;
  Decoder decoder(model, dopts);

  std::vector<SentenceEvidence> evidence(sentences.size());
  auto estep_sentence = [&](size_t si) {
    SentenceEvidence &ev = evidence[si];
    try {
      Stack finals = decoder.decode(sentences[si]);
      if (finals.empty()) {
        ev.failed = true;
        return;
      }
      if (nbest != DecoderOptions::kUnbounded && finals.size() > nbest)
        finals.resize(nbest);  // decode() returns hypotheses sorted
      double mass = Decoder::stack_log_mass(finals);
      ev.loglik = mass;
      ev.parses.reserve(finals.size());
      for (const Hypothesis &h : finals)
        ev.parses.emplace_back(decoder.trace_derivation(h),
                               std::exp(h.logp - mass));
    } catch (const DataError &) {
      ev.failed = true;
    }
  };

  if (cfg.threads <= 1 || sentences.size() < 2) {
    for (size_t i = 0; i < sentences.size(); ++i) estep_sentence(i);
  } else {
    size_t n_threads = std::min(cfg.threads, sentences.size());
    std::vector<std::thread> pool;
    for (size_t t = 0; t < n_threads; ++t)
      pool.emplace_back([&, t] {
        for (size_t i = t; i < sentences.size(); i += n_threads)
          estep_sentence(i);
      });
    for (std::thread &th : pool) th.join();
  }

  // Fractional counts, accumulated in sentence order for determinism.
  ComponentCounts counts(model.vocab, model.predictor_mode);
  size_t skipped = 0, tokens = 0;
  double loglik = 0.0;
  for (size_t si = 0; si < sentences.size(); ++si) {
    const SentenceEvidence &ev = evidence[si];
    if (ev.failed) {
      ++skipped;
      continue;
    }
    for (const auto &[deriv, rho] : ev.parses) counts.accumulate(deriv, rho);
    loglik += ev.loglik;
    tokens += sentences[si].size() + 1;
  }

  counts.predictor.finalize();
  counts.tagger.finalize();
  counts.constructor_model.finalize();

  ComponentCounts::HeldoutEvents hev;
  for (const IdDerivation &d : heldout) counts.extract_heldout(d, hev);
  counts.predictor.estimate_weights(hev.predictor, cfg.weight_tol,
                                    cfg.weight_max_iter);
  counts.tagger.estimate_weights(hev.tagger, cfg.weight_tol,
                                 cfg.weight_max_iter);
  counts.constructor_model.estimate_weights(hev.constructor_ev, cfg.weight_tol,
                                            cfg.weight_max_iter);

  ModelSet next = ModelSet::make_empty(model.vocab, model.predictor_mode,
                                       model.scheme);
  next.config_echo = model.config_echo;
  next.predictor = std::move(counts.predictor);
  next.tagger = std::move(counts.tagger);
  next.constructor_model = std::move(counts.constructor_model);
  next.trigram = model.trigram;  // untouched by EM

  if (log) {
    log->sentences = sentences.size() - skipped;
    log->skipped = skipped;
    log->tokens = tokens;
    log->loglik = loglik;
    log->train_ppl = tokens ? std::exp(-loglik / (double)tokens) : 0.0;
  }
  return next;
}

}  // namespace slm
