#include "slm/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <thread>
#include <unordered_map>

#include "slm/errors.hpp"

namespace slm {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_sum_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

uint64_t stack_signature(const std::vector<ExposedHead> &stack) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (const ExposedHead &e : stack) {
    h = (h ^ e.word) * 0x100000001b3ull;
    h = (h ^ e.label) * 0x100000001b3ull;
  }
  return h;
}

bool stack_less(const std::vector<ExposedHead> &a,
                const std::vector<ExposedHead> &b) {
  if (a.size() != b.size()) return a.size() < b.size();
  for (size_t i = 0; i < a.size(); ++i) {
    if (a[i].word != b[i].word) return a[i].word < b[i].word;
    if (a[i].label != b[i].label) return a[i].label < b[i].label;
  }
  return false;
}

// Deterministic stack order: descending score, then the last action's
// (op kind, NT label), then stack contents, then insertion sequence.
bool hyp_less(const Hypothesis &a, const Hypothesis &b) {
  if (a.logp != b.logp) return a.logp > b.logp;
  const TraceNode *ta = a.trace.get(), *tb = b.trace.get();
  if (ta && tb && !ta->is_shift && !tb->is_shift) {
    if (ta->kind != tb->kind) return ta->kind < tb->kind;
    if (ta->nt_label != tb->nt_label) return ta->nt_label < tb->nt_label;
  }
  if (stack_less(a.stack, b.stack)) return true;
  if (stack_less(b.stack, a.stack)) return false;
  return a.seq < b.seq;
}

}  // namespace

Decoder::Decoder(const ModelSet &model, DecoderOptions opts)
    : model_(&model), opts_(opts) {
  if (opts_.forced_right_branching) {
    if (model.vocab.tag_ids.empty())
      throw ConfigError("forced right-branching mode needs a tag vocabulary");
    forced_tag_ = model.vocab.tag_ids.front();
  }
}

Stack Decoder::initial_stack() const {
  Hypothesis h;
  h.stack.push_back({Vocabulary::kBos, Vocabulary::kBos});
  h.logp = 0.0;
  h.best_logp = 0.0;
  return {std::move(h)};
}

// Hash-indexed pool that merges hypotheses with identical head stacks by
// log-sum, which keeps the predictive mass intact, keeping the max
// branch's backpointer.
class Decoder::MergePool {
 public:
  explicit MergePool(bool recombine) : recombine_(recombine) {}

  void add(Hypothesis &&h) {
    if (!recombine_) {
      items_.push_back(std::move(h));
      return;
    }
    uint64_t sig = stack_signature(h.stack);
    auto &bucket = index_[sig];
    for (size_t i : bucket) {
      Hypothesis &e = items_[i];
      if (e.stack == h.stack) {
        e.logp = log_sum_exp(e.logp, h.logp);
        if (h.best_logp > e.best_logp) {
          e.best_logp = h.best_logp;
          e.trace = std::move(h.trace);
        }
        return;
      }
    }
    bucket.push_back(items_.size());
    items_.push_back(std::move(h));
  }

  size_t size() const { return items_.size(); }
  Stack take() { return std::move(items_); }

 private:
  bool recombine_;
  Stack items_;
  std::unordered_map<uint64_t, std::vector<size_t>> index_;
};

void Decoder::prune(Stack &stack) const {
  std::sort(stack.begin(), stack.end(), hyp_less);
  if (opts_.beam != DecoderOptions::kUnbounded && stack.size() > opts_.beam)
    stack.resize(opts_.beam);
  if (std::isfinite(opts_.delta) && !stack.empty()) {
    double floor = stack.front().logp - opts_.delta;
    while (!stack.empty() && stack.back().logp < floor) stack.pop_back();
  }
}

// Expands constructor op sequences to their null closure, wave by wave
// (wave d = hypotheses that executed d ops at this position). Each wave is
// recombined and pruned like a stack, which keeps the exponential closure
// bounded under finite beams and exact under unbounded ones.
void Decoder::close_ops(std::vector<Hypothesis> &wave, MergePool &finals,
                        uint64_t *seq) const {
  const VocabSet &vocab = model_->vocab;
  size_t states = wave.size();
  while (!wave.empty()) {
    MergePool next(opts_.recombine);
    for (Hypothesis &hyp : wave) {
      const size_t depth = hyp.depth_above_bos();
      const bool can_adjoin = depth >= 2 && !opts_.forced_right_branching;
      // Legality masking: null is always legal; adjoins need two heads
      // above <s>. With every op legal the distribution already sums to
      // one, so renormalization only bites when adjoins are masked and
      // then the lone null gets probability one.
      if (!can_adjoin) {
        Hypothesis done = std::move(hyp);
        auto t = std::make_shared<TraceNode>();
        t->prev = std::move(done.trace);
        t->is_shift = false;
        t->kind = OpKind::Null;
        done.trace = std::move(t);
        done.seq = (*seq)++;
        finals.add(std::move(done));
        continue;
      }
      DIModel::SparseDist dist = model_->op_distribution(hyp.h0(), hyp.h1());
      auto op_prob = [&](uint32_t op_id) {
        auto it = std::lower_bound(
            dist.present.begin(), dist.present.end(), op_id,
            [](const std::pair<uint32_t, double> &a, uint32_t b) {
              return a.first < b;
            });
        return (it != dist.present.end() && it->first == op_id)
                   ? it->second
                   : dist.absent_prob;
      };
      {
        double p_null = op_prob(0);
        Hypothesis done = hyp;  // null keeps the stack
        done.logp += std::log(p_null);
        done.best_logp += std::log(p_null);
        auto t = std::make_shared<TraceNode>();
        t->prev = done.trace;
        t->is_shift = false;
        t->kind = OpKind::Null;
        done.trace = std::move(t);
        done.seq = (*seq)++;
        finals.add(std::move(done));
      }
      for (uint32_t op_id = 1; op_id < vocab.op_count(); ++op_id) {
        double p = op_prob(op_id);
        if (p <= 0.0) continue;
        auto [kind, nt] = vocab.op_of(op_id);
        Hypothesis h2;
        h2.stack.assign(hyp.stack.begin(), hyp.stack.end() - 2);
        const ExposedHead &prev = hyp.stack[hyp.stack.size() - 2];
        const ExposedHead &top = hyp.stack.back();
        h2.stack.push_back(
            {kind == OpKind::AdjoinLeft ? prev.word : top.word, nt});
        h2.logp = hyp.logp + std::log(p);
        h2.best_logp = hyp.best_logp + std::log(p);
        auto t = std::make_shared<TraceNode>();
        t->prev = hyp.trace;
        t->is_shift = false;
        t->kind = kind;
        t->nt_label = nt;
        h2.trace = std::move(t);
        h2.seq = (*seq)++;
        next.add(std::move(h2));
      }
    }
    states += next.size();
    if (states > opts_.max_states_per_position)
      throw DataError("op closure exceeded the per-position state budget");
    Stack next_wave = next.take();
    prune(next_wave);
    wave = std::move(next_wave);
  }
}

Stack Decoder::advance(const Stack &stack, uint32_t word) const {
  if (stack.empty()) throw DataError("advance on an empty stack");
  const VocabSet &vocab = model_->vocab;
  uint64_t seq = 0;
  std::vector<Hypothesis> wave;
  for (const Hypothesis &hyp : stack) {
    double lpw = std::log(model_->p_word(hyp.h0(), hyp.h1(), word));
    if (opts_.forced_right_branching) {
      Hypothesis h2 = hyp;
      h2.logp += lpw;
      h2.best_logp += lpw;
      h2.stack.push_back({word, forced_tag_});
      auto t = std::make_shared<TraceNode>();
      t->prev = hyp.trace;
      t->is_shift = true;
      t->word = word;
      t->tag = forced_tag_;
      h2.trace = std::move(t);
      h2.seq = seq++;
      wave.push_back(std::move(h2));
      continue;
    }
    for (uint32_t tag : vocab.tag_ids) {
      double pt = model_->p_tag(word, hyp.h0(), hyp.h1(), tag);
      if (pt <= 0.0) continue;
      Hypothesis h2 = hyp;
      h2.logp += lpw + std::log(pt);
      h2.best_logp += lpw + std::log(pt);
      h2.stack.push_back({word, tag});
      auto t = std::make_shared<TraceNode>();
      t->prev = hyp.trace;
      t->is_shift = true;
      t->word = word;
      t->tag = tag;
      h2.trace = std::move(t);
      h2.seq = seq++;
      wave.push_back(std::move(h2));
    }
  }
  prune(wave);
  MergePool finals(opts_.recombine);
  close_ops(wave, finals, &seq);
  Stack out = finals.take();
  prune(out);
  return out;
}

double Decoder::stack_log_mass(const Stack &stack) {
  double m = kNegInf;
  for (const Hypothesis &h : stack) m = log_sum_exp(m, h.logp);
  return m;
}

double Decoder::next_word_prob(const Stack &stack, uint32_t word) const {
  if (stack.empty()) throw DataError("next_word_prob on an empty stack");
  double mass = stack_log_mass(stack);
  double p = 0.0;
  for (const Hypothesis &h : stack) {
    double rho = std::exp(h.logp - mass);
    p += rho * model_->p_word(h.h0(), h.h1(), word);
  }
  return p;
}

std::vector<double> Decoder::next_word_distribution(const Stack &stack) const {
  std::vector<double> dist(model_->vocab.words.size(), 0.0);
  double mass = stack_log_mass(stack);
  for (const Hypothesis &h : stack) {
    double rho = std::exp(h.logp - mass);
    for (uint32_t w = 0; w < dist.size(); ++w)
      dist[w] += rho * model_->p_word(h.h0(), h.h1(), w);
  }
  return dist;
}

Stack Decoder::decode(const std::vector<uint32_t> &words) const {
  Stack stack = initial_stack();
  for (uint32_t w : words) stack = advance(stack, w);
  // Sentence-end factor: predictor only, no shift.
  for (Hypothesis &h : stack) {
    double lp = std::log(model_->p_word(h.h0(), h.h1(), Vocabulary::kEos));
    h.logp += lp;
    h.best_logp += lp;
  }
  std::sort(stack.begin(), stack.end(), hyp_less);
  return stack;
}

IdDerivation Decoder::trace_derivation(const Hypothesis &hyp) const {
  std::vector<const TraceNode *> actions;
  for (const TraceNode *t = hyp.trace.get(); t; t = t->prev.get())
    actions.push_back(t);
  std::reverse(actions.begin(), actions.end());
  IdDerivation d;
  for (const TraceNode *t : actions) {
    if (t->is_shift) {
      d.steps.push_back({t->word, t->tag, {}});
    } else {
      if (d.steps.empty()) throw DataError("op before any shift in trace");
      d.steps.back().ops.push_back({t->kind, t->nt_label});
    }
  }
  return d;
}

std::unique_ptr<BinNode> Decoder::best_parse(
    const std::vector<uint32_t> &words) const {
  if (words.empty()) throw DataError("best_parse on an empty sentence");
  Stack stack = decode(words);
  if (stack.empty()) throw DataError("search failure: empty final stack");
  const Hypothesis *best = &stack.front();
  for (const Hypothesis &h : stack)
    if (h.best_logp > best->best_logp) best = &h;
  IdDerivation idd = trace_derivation(*best);

  const VocabSet &vocab = model_->vocab;
  Derivation d;
  for (const IdStep &s : idd.steps) {
    DerivationStep step;
    step.word = vocab.words.symbol(s.word);
    step.tag = vocab.labels.symbol(s.tag);
    for (const IdOp &op : s.ops)
      step.ops.push_back({op.kind, op.kind == OpKind::Null
                                       ? std::string()
                                       : vocab.labels.symbol(op.nt_label)});
    d.steps.push_back(std::move(step));
  }
  // Probability-one completion: adjoin the remaining heads under the
  // reserved TOP label, right-branching.
  size_t depth = best->depth_above_bos();
  if (!d.steps.empty()) {
    std::vector<ConstructorOp> &ops = d.steps.back().ops;
    if (!ops.empty() && ops.back().kind == OpKind::Null) ops.pop_back();
    for (size_t i = 1; i < depth; ++i)
      ops.push_back({OpKind::AdjoinRight, "TOP"});
    ops.push_back({OpKind::Null, ""});
  }
  return derivation_to_tree(d);
}

PplReport perplexity(const ModelSet &model, const DecoderOptions &dopts,
                     const std::vector<std::vector<uint32_t>> &sentences,
                     const InterpolationConfig &cfg, size_t threads) {
  if (cfg.lambda < 0.0 || cfg.lambda > 1.0)
    throw ConfigError("interpolation weight must be in [0, 1]");
  const bool use_slm = cfg.lambda < 1.0;
  const bool use_tri = cfg.lambda > 0.0;

  std::optional<Decoder> dec;
  if (use_slm) dec.emplace(model, dopts);

  std::vector<SentenceScore> scores(sentences.size());
  auto score_sentence = [&](size_t si) {
    const std::vector<uint32_t> &words = sentences[si];
    SentenceScore sc;
    Stack stack;
    if (use_slm) stack = dec->initial_stack();
    uint32_t w2 = Vocabulary::kBos, w1 = Vocabulary::kBos;
    for (size_t k = 0; k <= words.size(); ++k) {
      uint32_t w = k < words.size() ? words[k] : Vocabulary::kEos;
      double p_tri = use_tri ? model.p_trigram(w2, w1, w) : 0.0;
      double p_slm = 0.0;
      if (use_slm) {
        if (!sc.search_failure && stack.empty()) sc.search_failure = true;
        p_slm = sc.search_failure ? model.p_trigram(w2, w1, w)
                                  : dec->next_word_prob(stack, w);
      }
      double p = cfg.lambda * p_tri + (1.0 - cfg.lambda) * p_slm;
      sc.logprob += std::log(p);
      sc.tokens += 1;
      if (use_slm && !sc.search_failure && k < words.size())
        stack = dec->advance(stack, w);
      w2 = w1;
      w1 = w;
    }
    scores[si] = sc;
  };

  if (threads <= 1 || sentences.size() < 2) {
    for (size_t i = 0; i < sentences.size(); ++i) score_sentence(i);
  } else {
    size_t n_threads = std::min(threads, sentences.size());
    std::vector<std::thread> pool;
    for (size_t t = 0; t < n_threads; ++t)
      pool.emplace_back([&, t] {
        for (size_t i = t; i < sentences.size(); i += n_threads)
          score_sentence(i);
      });
    for (std::thread &th : pool) th.join();
  }

  PplReport rep;
  rep.sentences = sentences.size();
  for (const SentenceScore &sc : scores) {
    rep.tokens += sc.tokens;
    rep.logprob += sc.logprob;
    if (sc.search_failure) ++rep.flagged_sentences;
  }
  rep.ppl = rep.tokens ? std::exp(-rep.logprob / (double)rep.tokens) : 0.0;
  rep.per_sentence = std::move(scores);
  return rep;
}

}  // namespace slm
