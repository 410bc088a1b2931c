#ifndef SLM_DECODER_HPP_
#define SLM_DECODER_HPP_

#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "slm/model_set.hpp"

namespace slm {

// Backpointer chain for parse and derivation recovery. Shift actions carry
// word+tag, op actions the constructor op; the chain is shared between
// hypotheses, max-probability branch kept on recombination.
struct TraceNode {
  std::shared_ptr<const TraceNode> prev;
  bool is_shift = false;
  uint32_t word = 0;
  uint32_t tag = 0;
  OpKind kind = OpKind::Null;
  uint32_t nt_label = 0;
};

// Word-parse prefix: the stack of exposed heads (bottom = sentence-begin
// marker) and the accumulated ln P(W_k T_k).
struct Hypothesis {
  std::vector<ExposedHead> stack;
  double logp = 0.0;       // ln of summed mass after recombination
  double best_logp = 0.0;  // max single-derivation branch
  std::shared_ptr<const TraceNode> trace;
  uint64_t seq = 0;  // deterministic tie-break of equal-score states

  const ExposedHead &h0() const { return stack.back(); }
  // h_{-1}; the bottom <s> head doubles as padding when only one head is
  // above it.
  const ExposedHead &h1() const {
    return stack.size() >= 2 ? stack[stack.size() - 2] : stack[0];
  }
  size_t depth_above_bos() const { return stack.size() - 1; }
};

struct DecoderOptions {
  size_t beam = 128;                          // B, max hypotheses per stack
  double delta = 6.907755278982137;           // ln 1000 log-prob window
  bool recombine = true;                      // merge identical head stacks
  bool forced_right_branching = false;        // test mode: null-only ops,
                                              // first tag forced
  size_t max_states_per_position = 1 << 20;   // safety valve
  static constexpr size_t kUnbounded = std::numeric_limits<size_t>::max();
  static DecoderOptions unbounded() {
    DecoderOptions o;
    o.beam = kUnbounded;
    o.delta = std::numeric_limits<double>::infinity();
    return o;
  }
};

// One per-position stack S_k (sorted by descending log-prob).
using Stack = std::vector<Hypothesis>;

struct SentenceScore {
  size_t tokens = 0;       // predicted tokens incl. sentence-end
  double logprob = 0.0;    // ln of the interpolated probability product
  bool search_failure = false;
};

struct PplReport {
  size_t sentences = 0;
  size_t tokens = 0;
  double logprob = 0.0;
  double ppl = 0.0;
  size_t flagged_sentences = 0;
  std::vector<SentenceScore> per_sentence;
};

// Synchronous multi-stack beam search over word-parse prefixes.
class Decoder {
 public:
  Decoder(const ModelSet &model, DecoderOptions opts = {});

  Stack initial_stack() const;

  // Grows every word-parse k-prefix in `stack` by `word`: multiplies in
  // the predictor, loops tags over the tagger, expands constructor op
  // sequences to their null closure with legality masking (adjoins need
  // two heads above <s>), recombines and prunes to B within the delta
  // window. Throws DataError on an empty input stack.
  Stack advance(const Stack &stack, uint32_t word) const;

  // Word-level predictive probability: sum over stack hypotheses of
  // p_word weighted by the normalized stack posterior.
  double next_word_prob(const Stack &stack, uint32_t word) const;
  std::vector<double> next_word_distribution(const Stack &stack) const;

  // ln sum of P(W_k T_k) over the stack.
  static double stack_log_mass(const Stack &stack);

  // Full-sentence decode; returns the final stack with the sentence-end
  // predictor factor multiplied in (no shift of the end marker).
  Stack decode(const std::vector<uint32_t> &words) const;

  // Highest-probability parse of a complete sentence, completed to a
  // single root with probability-one adjoins under the reserved TOP label.
  std::unique_ptr<BinNode> best_parse(const std::vector<uint32_t> &words) const;

  // Derivation readout of a hypothesis trace (max branch).
  IdDerivation trace_derivation(const Hypothesis &hyp) const;

  const ModelSet &model() const { return *model_; }
  const DecoderOptions &options() const { return opts_; }

 private:
  class MergePool;
  void close_ops(std::vector<Hypothesis> &wave, MergePool &finals,
                 uint64_t *seq) const;
  void prune(Stack &stack) const;

  const ModelSet *model_;
  DecoderOptions opts_;
  uint32_t forced_tag_ = 0;
};

struct InterpolationConfig {
  double lambda = 0.0;  // weight on the trigram; in [0, 1]
};

// Corpus perplexity of lambda * p_trigram + (1-lambda) * p_slm over all
// predicted tokens including sentence-end. lambda = 1 never invokes the
// SLM decoder. On a search failure the rest of the sentence is scored by
// the trigram alone and the sentence is flagged.
PplReport perplexity(const ModelSet &model, const DecoderOptions &dopts,
                     const std::vector<std::vector<uint32_t>> &sentences,
                     const InterpolationConfig &cfg, size_t threads = 1);

}  // namespace slm

#endif  // SLM_DECODER_HPP_
