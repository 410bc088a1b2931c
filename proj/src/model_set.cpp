#include "slm/model_set.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "slm/errors.hpp"

namespace slm {

namespace {

// Feature orders are chosen so each back-off level is a prefix of the one
// above it.
const std::vector<std::string> kPredictorFeatures = {"h0.label", "h0.word",
                                                     "h-1.label", "h-1.word"};
const std::vector<std::string> kReducedPredictorFeatures = {"h0.word",
                                                            "h-1.word"};
const std::vector<std::string> kTaggerFeatures = {"w", "h0.label",
                                                  "h-1.label"};
const std::vector<std::string> kConstructorFeatures = {"h0.label", "h0.word",
                                                       "h-1.label",
                                                       "h-1.word"};
const std::vector<std::string> kTrigramFeatures = {"w-1", "w-2"};

const char *kCollapsedTag = "X";

DIModel::HeldoutEvent make_event(std::span<const uint32_t> ctx,
                                 uint32_t outcome) {
  DIModel::HeldoutEvent ev;
  ev.ctx = CtxKey(ctx, ctx.size());
  ev.outcome = outcome;
  return ev;
}

}  // namespace

uint32_t VocabSet::op_id(OpKind kind, uint32_t nt_label) const {
  if (kind == OpKind::Null) return 0;
  size_t j = nt_index(nt_label);
  return (uint32_t)(1 + 2 * j + (kind == OpKind::AdjoinRight ? 1 : 0));
}

std::pair<OpKind, uint32_t> VocabSet::op_of(uint32_t op_id) const {
  if (op_id == 0) return {OpKind::Null, 0};
  size_t j = (op_id - 1) / 2;
  if (j >= nt_ids.size()) throw DataError("op id out of range");
  OpKind k = (op_id - 1) % 2 == 0 ? OpKind::AdjoinLeft : OpKind::AdjoinRight;
  return {k, nt_ids[j]};
}

size_t VocabSet::nt_index(uint32_t nt_label) const {
  auto it = std::lower_bound(nt_ids.begin(), nt_ids.end(), nt_label);
  if (it == nt_ids.end() || *it != nt_label)
    throw DataError("label id " + std::to_string(nt_label) +
                    " is not a registered NT label");
  return (size_t)(it - nt_ids.begin());
}

void ModelSet::predictor_ctx(PredictorMode mode, const ExposedHead &h0,
                             const ExposedHead &h1, uint32_t out[4],
                             size_t *n) {
  if (mode == PredictorMode::Full) {
    out[0] = h0.label;
    out[1] = h0.word;
    out[2] = h1.label;
    out[3] = h1.word;
    *n = 4;
  } else {
    out[0] = h0.word;
    out[1] = h1.word;
    *n = 2;
  }
}

void ModelSet::tagger_ctx(uint32_t word, const ExposedHead &h0,
                          const ExposedHead &h1, uint32_t out[4], size_t *n) {
  out[0] = word;
  out[1] = h0.label;
  out[2] = h1.label;
  *n = 3;
}

ModelSet ModelSet::make_empty(VocabSet vocab, PredictorMode mode,
                              EnrichScheme scheme) {
  ModelSet m;
  m.vocab = std::move(vocab);
  m.predictor_mode = mode;
  m.scheme = scheme;
  m.predictor = DIModel(mode == PredictorMode::Full ? kPredictorFeatures
                                                    : kReducedPredictorFeatures,
                        (uint32_t)m.vocab.words.size());
  m.tagger = DIModel(kTaggerFeatures, (uint32_t)m.vocab.tag_ids.size());
  m.constructor_model =
      DIModel(kConstructorFeatures, (uint32_t)m.vocab.op_count());
  m.trigram = DIModel(kTrigramFeatures, (uint32_t)m.vocab.words.size());
  return m;
}

double ModelSet::p_word(const ExposedHead &h0, const ExposedHead &h1,
                        uint32_t word) const {
  uint32_t ctx[4];
  size_t n;
  predictor_ctx(predictor_mode, h0, h1, ctx, &n);
  return predictor.prob({ctx, n}, word);
}

double ModelSet::p_tag(uint32_t word, const ExposedHead &h0,
                       const ExposedHead &h1, uint32_t tag) const {
  uint32_t ctx[4];
  size_t n;
  tagger_ctx(word, h0, h1, ctx, &n);
  return tagger.prob({ctx, n}, tag);
}

double ModelSet::p_op(const ExposedHead &h0, const ExposedHead &h1,
                      uint32_t op_id) const {
  uint32_t ctx[4];
  size_t n;
  predictor_ctx(PredictorMode::Full, h0, h1, ctx, &n);
  return constructor_model.prob({ctx, n}, op_id);
}

DIModel::SparseDist ModelSet::op_distribution(const ExposedHead &h0,
                                              const ExposedHead &h1) const {
  uint32_t ctx[4];
  size_t n;
  predictor_ctx(PredictorMode::Full, h0, h1, ctx, &n);
  return constructor_model.distribution({ctx, n});
}

double ModelSet::p_trigram(uint32_t w2, uint32_t w1, uint32_t w) const {
  uint32_t ctx[2] = {w1, w2};
  return trigram.prob({ctx, 2}, w);
}

// ---------------------------------------------------------------------------
// Event extraction

ComponentCounts::ComponentCounts(const VocabSet &vocab, PredictorMode mode)
    : predictor(mode == PredictorMode::Full ? kPredictorFeatures
                                            : kReducedPredictorFeatures,
                (uint32_t)vocab.words.size()),
      tagger(kTaggerFeatures, (uint32_t)vocab.tag_ids.size()),
      constructor_model(kConstructorFeatures, (uint32_t)vocab.op_count()),
      vocab_(&vocab),
      mode_(mode) {}

template <class FPred, class FTag, class FOp>
void ComponentCounts::walk(const IdDerivation &d, FPred &&on_pred,
                           FTag &&on_tag, FOp &&on_op) const {
  std::vector<ExposedHead> stack;
  stack.push_back({Vocabulary::kBos, Vocabulary::kBos});
  auto h0 = [&]() -> const ExposedHead & { return stack.back(); };
  auto h1 = [&]() -> const ExposedHead & {
    return stack.size() >= 2 ? stack[stack.size() - 2] : stack[0];
  };
  for (const IdStep &step : d.steps) {
    on_pred(h0(), h1(), step.word);
    on_tag(step.word, h0(), h1(), step.tag);
    stack.push_back({step.word, step.tag});
    for (const IdOp &op : step.ops) {
      on_op(h0(), h1(), vocab_->op_id(op.kind, op.nt_label));
      if (op.kind == OpKind::Null) continue;
      if (stack.size() < 3)
        throw DataError("derivation adjoin below two exposed heads");
      ExposedHead top = stack.back();
      stack.pop_back();
      ExposedHead prev = stack.back();
      stack.pop_back();
      uint32_t headword =
          op.kind == OpKind::AdjoinLeft ? prev.word : top.word;
      stack.push_back({headword, op.nt_label});
    }
  }
  // The sentence-end prediction closes the derivation: no tag or
  // constructor events there.
  on_pred(h0(), h1(), Vocabulary::kEos);
}

void ComponentCounts::accumulate(const IdDerivation &d, double weight) {
  uint32_t ctx[4];
  size_t n;
  walk(
      d,
      [&](const ExposedHead &h0, const ExposedHead &h1, uint32_t w) {
        ModelSet::predictor_ctx(mode_, h0, h1, ctx, &n);
        predictor.add({ctx, n}, w, weight);
      },
      [&](uint32_t w, const ExposedHead &h0, const ExposedHead &h1,
          uint32_t t) {
        ModelSet::tagger_ctx(w, h0, h1, ctx, &n);
        tagger.add({ctx, n}, t, weight);
      },
      [&](const ExposedHead &h0, const ExposedHead &h1, uint32_t op) {
        ModelSet::predictor_ctx(PredictorMode::Full, h0, h1, ctx, &n);
        constructor_model.add({ctx, n}, op, weight);
      });
}

void ComponentCounts::extract_heldout(const IdDerivation &d,
                                      HeldoutEvents &out) const {
  uint32_t ctx[4];
  size_t n;
  walk(
      d,
      [&](const ExposedHead &h0, const ExposedHead &h1, uint32_t w) {
        ModelSet::predictor_ctx(mode_, h0, h1, ctx, &n);
        out.predictor.push_back(make_event({ctx, n}, w));
      },
      [&](uint32_t w, const ExposedHead &h0, const ExposedHead &h1,
          uint32_t t) {
        ModelSet::tagger_ctx(w, h0, h1, ctx, &n);
        out.tagger.push_back(make_event({ctx, n}, t));
      },
      [&](const ExposedHead &h0, const ExposedHead &h1, uint32_t op) {
        ModelSet::predictor_ctx(PredictorMode::Full, h0, h1, ctx, &n);
        out.constructor_ev.push_back(make_event({ctx, n}, op));
      });
}

void ComponentCounts::merge_from(const ComponentCounts &other) {
  predictor.merge_counts_from(other.predictor);
  tagger.merge_counts_from(other.tagger);
  constructor_model.merge_counts_from(other.constructor_model);
}

TrigramCounts::TrigramCounts(uint32_t vocab_size)
    : model(kTrigramFeatures, vocab_size) {}

void TrigramCounts::accumulate(const std::vector<uint32_t> &sentence,
                               double weight) {
  uint32_t w2 = Vocabulary::kBos, w1 = Vocabulary::kBos;
  for (size_t k = 0; k <= sentence.size(); ++k) {
    uint32_t w = k < sentence.size() ? sentence[k] : Vocabulary::kEos;
    uint32_t ctx[2] = {w1, w2};
    model.add({ctx, 2}, w, weight);
    w2 = w1;
    w1 = w;
  }
}

void TrigramCounts::extract_heldout(
    const std::vector<uint32_t> &sentence,
    std::vector<DIModel::HeldoutEvent> &out) const {
  uint32_t w2 = Vocabulary::kBos, w1 = Vocabulary::kBos;
  for (size_t k = 0; k <= sentence.size(); ++k) {
    uint32_t w = k < sentence.size() ? sentence[k] : Vocabulary::kEos;
    uint32_t ctx[2] = {w1, w2};
    out.push_back(make_event({ctx, 2}, w));
    w2 = w1;
    w1 = w;
  }
}

// ---------------------------------------------------------------------------
// Training

IdDerivation to_id_derivation(const Derivation &d, const VocabSet &vocab) {
  IdDerivation out;
  out.steps.reserve(d.steps.size());
  for (const DerivationStep &s : d.steps) {
    IdStep step;
    step.word = vocab.words.id(s.word);
    step.tag = vocab.labels.id(s.tag);
    step.ops.reserve(s.ops.size());
    for (const ConstructorOp &op : s.ops)
      step.ops.push_back(
          {op.kind,
           op.kind == OpKind::Null ? 0u : vocab.labels.id(op.nt_label)});
    out.steps.push_back(std::move(step));
  }
  return out;
}

std::vector<uint32_t> to_word_ids(const std::vector<std::string> &words,
                                  const Vocabulary &vocab) {
  std::vector<uint32_t> ids;
  ids.reserve(words.size());
  for (const std::string &w : words) ids.push_back(vocab.id(w));
  return ids;
}

VocabSet build_vocab_set(const std::vector<const BinNode *> &trees,
                         const Vocabulary &words) {
  std::unordered_map<std::string, uint64_t> tag_freq, nt_freq;
  std::vector<std::pair<std::string, std::string>> yield;
  std::vector<std::string> nts;
  for (const BinNode *t : trees) {
    yield.clear();
    bin_yield(*t, yield);
    for (const auto &[w, tag] : yield) ++tag_freq[tag];
    nts.clear();
    collect_nt_labels(*t, nts);
    for (const std::string &l : nts) ++nt_freq[l];
  }
  auto sorted = [](const std::unordered_map<std::string, uint64_t> &freq) {
    std::vector<std::pair<std::string, uint64_t>> v(freq.begin(), freq.end());
    std::sort(v.begin(), v.end(), [](const auto &a, const auto &b) {
      if (a.second != b.second) return a.second > b.second;
      return a.first < b.first;
    });
    return v;
  };
  VocabSet vs;
  vs.words = words;
  for (const auto &[sym, c] : sorted(tag_freq)) {
    uint32_t id = vs.labels.add(sym, c);
    vs.tag_ids.push_back(id);
  }
  for (const auto &[sym, c] : sorted(nt_freq)) {
    uint32_t id = vs.labels.add(sym, c);
    vs.nt_ids.push_back(id);
  }
  std::sort(vs.tag_ids.begin(), vs.tag_ids.end());
  std::sort(vs.nt_ids.begin(), vs.nt_ids.end());
  vs.tag_ids.erase(std::unique(vs.tag_ids.begin(), vs.tag_ids.end()),
                   vs.tag_ids.end());
  vs.nt_ids.erase(std::unique(vs.nt_ids.begin(), vs.nt_ids.end()),
                  vs.nt_ids.end());
  return vs;
}

namespace {

struct PreparedCorpus {
  std::vector<IdDerivation> train, heldout;
  std::vector<std::vector<uint32_t>> train_words, heldout_words;
  VocabSet vocab;
  size_t tokens = 0;
};

ModelSet finish_training(PreparedCorpus &&prep, PredictorMode mode,
                         EnrichScheme scheme, const TrainOptions &opts,
                         TrainReport *report) {
  ModelSet m = ModelSet::make_empty(std::move(prep.vocab), mode, scheme);

  ComponentCounts counts(m.vocab, mode);
  for (const IdDerivation &d : prep.train) counts.accumulate(d);
  TrigramCounts tri((uint32_t)m.vocab.words.size());
  for (const auto &s : prep.train_words) tri.accumulate(s);

  counts.predictor.finalize();
  counts.tagger.finalize();
  counts.constructor_model.finalize();
  tri.model.finalize();

  ComponentCounts::HeldoutEvents hev;
  std::vector<DIModel::HeldoutEvent> tri_ev;
  for (const IdDerivation &d : prep.heldout) counts.extract_heldout(d, hev);
  for (const auto &s : prep.heldout_words) tri.extract_heldout(s, tri_ev);

  bool fallback = false;
  auto fit = [&](DIModel &mod, const std::vector<DIModel::HeldoutEvent> &ev) {
    auto est = mod.estimate_weights(ev, opts.weight_tol, opts.weight_max_iter);
    fallback = fallback || est.fallback_fixed;
  };
  fit(counts.predictor, hev.predictor);
  fit(counts.tagger, hev.tagger);
  fit(counts.constructor_model, hev.constructor_ev);
  fit(tri.model, tri_ev);

  m.predictor = std::move(counts.predictor);
  m.tagger = std::move(counts.tagger);
  m.constructor_model = std::move(counts.constructor_model);
  m.trigram = std::move(tri.model);

  if (report) {
    report->train_sentences = prep.train.size();
    report->heldout_sentences = prep.heldout.size();
    report->predicted_tokens = prep.tokens;
    report->fixed_weight_fallback = fallback;
    if (fallback)
      report->warnings.push_back(
          "no heldout data: interpolation weights fixed at 0.5");
  }
  return m;
}

}  // namespace

ModelSet train_model(const std::vector<Tree> &train_trees,
                     const std::vector<Tree> &heldout_trees,
                     const HeadRules &heads, const BinarizationRules &bins,
                     const TrainOptions &opts, TrainReport *report) {
  if (opts.trigram_equiv)
    throw ConfigError("trigram-equivalence mode trains from raw text");
  if (train_trees.empty()) throw DataError("empty training corpus");

  // Optional every-Nth heldout split when no explicit heldout is given.
  std::vector<const Tree *> train_ptr, held_ptr;
  if (!heldout_trees.empty()) {
    for (const Tree &t : train_trees) train_ptr.push_back(&t);
    for (const Tree &t : heldout_trees) held_ptr.push_back(&t);
  } else if (opts.heldout_period > 0) {
    for (size_t i = 0; i < train_trees.size(); ++i) {
      if ((i + 1) % opts.heldout_period == 0)
        held_ptr.push_back(&train_trees[i]);
      else
        train_ptr.push_back(&train_trees[i]);
    }
  } else {
    for (const Tree &t : train_trees) train_ptr.push_back(&t);
  }
  if (train_ptr.empty()) throw DataError("empty training split");

  Vocabulary words = build_word_vocab(train_ptr, opts.vocab_cap);

  auto transform_all = [&](const std::vector<const Tree *> &src) {
    std::vector<std::unique_ptr<BinNode>> out;
    out.reserve(src.size());
    for (const Tree *t : src)
      out.push_back(transform_tree(*t, heads, bins, opts.scheme));
    return out;
  };
  std::vector<std::unique_ptr<BinNode>> train_bin = transform_all(train_ptr);
  std::vector<std::unique_ptr<BinNode>> held_bin = transform_all(held_ptr);

  std::vector<const BinNode *> all_bin;
  for (const auto &b : train_bin) all_bin.push_back(b.get());
  for (const auto &b : held_bin) all_bin.push_back(b.get());

  PreparedCorpus prep;
  prep.vocab = build_vocab_set(all_bin, words);
  auto derive = [&](const std::vector<std::unique_ptr<BinNode>> &bins_,
                    std::vector<IdDerivation> &deriv,
                    std::vector<std::vector<uint32_t>> &word_seqs) {
    for (const auto &b : bins_) {
      Derivation d = tree_to_derivation(*b);
      deriv.push_back(to_id_derivation(d, prep.vocab));
      std::vector<uint32_t> ws;
      ws.reserve(d.steps.size());
      for (const DerivationStep &s : d.steps)
        ws.push_back(prep.vocab.words.id(s.word));
      word_seqs.push_back(std::move(ws));
      prep.tokens += d.steps.size() + 1;
    }
  };
  derive(train_bin, prep.train, prep.train_words);
  size_t train_tokens = prep.tokens;
  derive(held_bin, prep.heldout, prep.heldout_words);
  prep.tokens = train_tokens;

  return finish_training(std::move(prep), PredictorMode::Full, opts.scheme,
                         opts, report);
}

ModelSet train_model_text(const std::vector<std::vector<std::string>> &train,
                          const std::vector<std::vector<std::string>> &heldout,
                          const TrainOptions &opts, TrainReport *report) {
  if (train.empty()) throw DataError("empty training corpus");

  std::vector<const std::vector<std::string> *> train_ptr, held_ptr;
  if (!heldout.empty()) {
    for (const auto &s : train) train_ptr.push_back(&s);
    for (const auto &s : heldout) held_ptr.push_back(&s);
  } else if (opts.heldout_period > 0) {
    for (size_t i = 0; i < train.size(); ++i) {
      if ((i + 1) % opts.heldout_period == 0)
        held_ptr.push_back(&train[i]);
      else
        train_ptr.push_back(&train[i]);
    }
  } else {
    for (const auto &s : train) train_ptr.push_back(&s);
  }
  if (train_ptr.empty()) throw DataError("empty training split");

  // Word vocabulary by frequency over the training split.
  std::unordered_map<std::string, uint64_t> freq;
  for (const auto *s : train_ptr)
    for (const std::string &w : *s) ++freq[w];
  std::vector<std::pair<std::string, uint64_t>> items(freq.begin(),
                                                      freq.end());
  std::sort(items.begin(), items.end(), [](const auto &a, const auto &b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (items.size() > opts.vocab_cap) items.resize(opts.vocab_cap);
  VocabSet vs;
  for (const auto &[w, c] : items) vs.words.add(w, c);
  vs.tag_ids.push_back(vs.labels.add(kCollapsedTag));
  // No NT labels: the op vocabulary degenerates to {null}.

  PreparedCorpus prep;
  prep.vocab = std::move(vs);
  auto derive = [&](const std::vector<const std::vector<std::string> *> &src,
                    std::vector<IdDerivation> &deriv,
                    std::vector<std::vector<uint32_t>> &word_seqs) {
    for (const auto *s : src) {
      Derivation d = right_branching_derivation(*s, kCollapsedTag);
      deriv.push_back(to_id_derivation(d, prep.vocab));
      word_seqs.push_back(to_word_ids(*s, prep.vocab.words));
      prep.tokens += s->size() + 1;
    }
  };
  derive(train_ptr, prep.train, prep.train_words);
  size_t train_tokens = prep.tokens;
  derive(held_ptr, prep.heldout, prep.heldout_words);
  prep.tokens = train_tokens;

  return finish_training(std::move(prep),
                         opts.trigram_equiv ? PredictorMode::Reduced
                                            : PredictorMode::Full,
                         EnrichScheme::Baseline, opts, report);
}

// ---------------------------------------------------------------------------
// Serialization

void ModelSet::write(std::ostream &os) const {
  os << "slm-model v1\n";
  os << "scheme " << scheme_name(scheme) << '\n';
  os << "predictor-mode "
     << (predictor_mode == PredictorMode::Full ? "full" : "reduced") << '\n';
  os << "config " << config_echo.size() << '\n';
  for (const auto &[k, v] : config_echo) os << k << " = " << v << '\n';
  os << "vocab words " << vocab.words.size() << '\n';
  vocab.words.write(os);
  os << "vocab labels " << vocab.labels.size() << '\n';
  vocab.labels.write(os);
  os << "tags " << vocab.tag_ids.size();
  for (uint32_t t : vocab.tag_ids) os << ' ' << t;
  os << '\n';
  os << "nts " << vocab.nt_ids.size();
  for (uint32_t t : vocab.nt_ids) os << ' ' << t;
  os << '\n';
  predictor.write(os, "predictor");
  tagger.write(os, "tagger");
  constructor_model.write(os, "constructor");
  trigram.write(os, "trigram");
}

void ModelSet::write_file(const std::string &path) const {
  std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw DataError("cannot write model file: " + tmp);
    write(os);
    if (!os) throw DataError("error writing model file: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

ModelSet ModelSet::read(std::istream &is) {
  std::string line;
  if (!std::getline(is, line) || line != "slm-model v1")
    throw DataError("not an slm model file");
  ModelSet m;
  std::string tok;
  if (!(is >> tok) || tok != "scheme") throw DataError("missing scheme");
  is >> tok;
  m.scheme = parse_scheme(tok);
  if (!(is >> tok) || tok != "predictor-mode")
    throw DataError("missing predictor-mode");
  is >> tok;
  m.predictor_mode =
      tok == "reduced" ? PredictorMode::Reduced : PredictorMode::Full;
  size_t ncfg = 0;
  if (!(is >> tok >> ncfg) || tok != "config")
    throw DataError("missing config block");
  std::getline(is, line);
  for (size_t i = 0; i < ncfg; ++i) {
    if (!std::getline(is, line)) throw DataError("truncated config block");
    size_t eq = line.find(" = ");
    if (eq == std::string::npos) throw DataError("bad config line: " + line);
    m.config_echo[line.substr(0, eq)] = line.substr(eq + 3);
  }
  size_t nwords = 0, nlabels = 0;
  if (!(is >> tok) || tok != "vocab") throw DataError("missing word vocab");
  is >> tok >> nwords;
  std::getline(is, line);
  m.vocab.words = Vocabulary::read(is, nwords);
  if (!(is >> tok) || tok != "vocab") throw DataError("missing label vocab");
  is >> tok >> nlabels;
  std::getline(is, line);
  m.vocab.labels = Vocabulary::read(is, nlabels);
  size_t ntags = 0, nnts = 0;
  if (!(is >> tok >> ntags) || tok != "tags") throw DataError("missing tags");
  m.vocab.tag_ids.resize(ntags);
  for (uint32_t &t : m.vocab.tag_ids) is >> t;
  if (!(is >> tok >> nnts) || tok != "nts") throw DataError("missing nts");
  m.vocab.nt_ids.resize(nnts);
  for (uint32_t &t : m.vocab.nt_ids) is >> t;
  std::getline(is, line);
  std::string name;
  m.predictor = DIModel::read(is, &name);
  if (name != "predictor") throw DataError("expected predictor model");
  m.tagger = DIModel::read(is, &name);
  if (name != "tagger") throw DataError("expected tagger model");
  m.constructor_model = DIModel::read(is, &name);
  if (name != "constructor") throw DataError("expected constructor model");
  m.trigram = DIModel::read(is, &name);
  if (name != "trigram") throw DataError("expected trigram model");
  return m;
}

ModelSet ModelSet::read_file(const std::string &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open model file: " + path);
  return read(is);
}

}  // namespace slm
