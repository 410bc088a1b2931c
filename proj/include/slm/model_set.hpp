#ifndef SLM_MODEL_SET_HPP_
#define SLM_MODEL_SET_HPP_

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "slm/binarize.hpp"
#include "slm/derivation.hpp"
#include "slm/dimodel.hpp"
#include "slm/tree.hpp"
#include "slm/vocab.hpp"

namespace slm {

// (headword, label) pair exposed at the top of a partial parse. The label
// is a POS tag exactly when the head is a root-only (single-leaf) subtree.
struct ExposedHead {
  uint32_t word = Vocabulary::kBos;
  uint32_t label = Vocabulary::kBos;

  bool operator==(const ExposedHead &o) const {
    return word == o.word && label == o.label;
  }
};

// Derivation with symbols resolved to ids; the unit both supervised
// counting and EM fractional counting run on.
struct IdOp {
  OpKind kind = OpKind::Null;
  uint32_t nt_label = 0;  // label-vocab id; unused for Null
};
struct IdStep {
  uint32_t word = 0;
  uint32_t tag = 0;  // label-vocab id
  std::vector<IdOp> ops;
};
struct IdDerivation {
  std::vector<IdStep> steps;
};

// Word vocabulary plus a unified label vocabulary (POS tags and NT labels
// share one id space, since exposed-head labels range over both), with the
// tag and NT subsets tracked separately.
struct VocabSet {
  Vocabulary words;
  Vocabulary labels;
  std::vector<uint32_t> tag_ids;  // ascending
  std::vector<uint32_t> nt_ids;   // ascending

  size_t op_count() const { return 1 + 2 * nt_ids.size(); }

  // Op ids: 0 = null; for the j-th NT, 1+2j = adjoin-left, 2+2j =
  // adjoin-right.
  uint32_t op_id(OpKind kind, uint32_t nt_label) const;
  std::pair<OpKind, uint32_t> op_of(uint32_t op_id) const;  // (kind, label id)
  size_t nt_index(uint32_t nt_label) const;                 // DataError if absent
};

enum class PredictorMode { Full, Reduced };

struct TrainOptions {
  EnrichScheme scheme = EnrichScheme::Baseline;
  size_t vocab_cap = 10000;
  // Every heldout_period-th sentence is held out for weight estimation
  // when no explicit heldout corpus is given; 0 disables the split.
  size_t heldout_period = 10;
  CleanOptions clean;
  // Trigram-equivalence test mode: collapse the tag/NT vocabularies to a
  // single type, use flat right-branching derivations and the reduced
  // predictor chain (h0.word, h-1.word).
  bool trigram_equiv = false;
  double weight_tol = 1e-6;
  size_t weight_max_iter = 100;
};

// The three SLM components plus the trigram baseline, over shared
// vocabularies.
class ModelSet {
 public:
  VocabSet vocab;
  PredictorMode predictor_mode = PredictorMode::Full;
  EnrichScheme scheme = EnrichScheme::Baseline;
  DIModel predictor;
  DIModel tagger;
  DIModel constructor_model;
  DIModel trigram;
  std::map<std::string, std::string> config_echo;  // reproducibility header

  static ModelSet make_empty(VocabSet vocab, PredictorMode mode,
                             EnrichScheme scheme);

  // Smoothed conditional probabilities of the three parser components.
  double p_word(const ExposedHead &h0, const ExposedHead &h1,
                uint32_t word) const;
  double p_tag(uint32_t word, const ExposedHead &h0, const ExposedHead &h1,
               uint32_t tag) const;
  double p_op(const ExposedHead &h0, const ExposedHead &h1,
              uint32_t op_id) const;
  DIModel::SparseDist op_distribution(const ExposedHead &h0,
                                      const ExposedHead &h1) const;
  double p_trigram(uint32_t w2, uint32_t w1, uint32_t w) const;

  void write(std::ostream &os) const;
  void write_file(const std::string &path) const;  // atomic (temp + rename)
  static ModelSet read(std::istream &is);
  static ModelSet read_file(const std::string &path);

  // Context tuples in model feature order.
  static void predictor_ctx(PredictorMode mode, const ExposedHead &h0,
                            const ExposedHead &h1, uint32_t out[4],
                            size_t *n);
  static void tagger_ctx(uint32_t word, const ExposedHead &h0,
                         const ExposedHead &h1, uint32_t out[4], size_t *n);
};

// Fractional-count accumulator for the three SLM components; mergeable.
class ComponentCounts {
 public:
  explicit ComponentCounts(const VocabSet &vocab, PredictorMode mode);

  // Replays the derivation's prefix stack and counts one predictor event
  // per position, one tagger event per position, one constructor event per
  // op (including each trailing null), plus the final sentence-end
  // predictor event. Context evolves within a position as ops apply.
  // Throws DataError when an adjoin pops below two available heads.
  void accumulate(const IdDerivation &d, double weight = 1.0);
  void merge_from(const ComponentCounts &other);

  DIModel predictor;
  DIModel tagger;
  DIModel constructor_model;

  // Heldout events in the same geometry, for weight estimation.
  struct HeldoutEvents {
    std::vector<DIModel::HeldoutEvent> predictor;
    std::vector<DIModel::HeldoutEvent> tagger;
    std::vector<DIModel::HeldoutEvent> constructor_ev;
  };
  void extract_heldout(const IdDerivation &d, HeldoutEvents &out) const;

 private:
  template <class FPred, class FTag, class FOp>
  void walk(const IdDerivation &d, FPred &&on_pred, FTag &&on_tag,
            FOp &&on_op) const;
  const VocabSet *vocab_;
  PredictorMode mode_;
};

// Standard deleted-interpolation trigram over word ids: levels
// (w-1, w-2) -> (w-1) -> () -> uniform, with double <s> padding.
class TrigramCounts {
 public:
  explicit TrigramCounts(uint32_t vocab_size);
  void accumulate(const std::vector<uint32_t> &sentence, double weight = 1.0);
  void extract_heldout(const std::vector<uint32_t> &sentence,
                       std::vector<DIModel::HeldoutEvent> &out) const;
  DIModel model;
};

struct TrainReport {
  size_t train_sentences = 0;
  size_t heldout_sentences = 0;
  size_t skipped_sentences = 0;
  size_t predicted_tokens = 0;  // train events incl. sentence-end
  bool fixed_weight_fallback = false;
  std::vector<std::string> warnings;
};

// Full initialization: vocabularies from the (transformed) corpus,
// supervised counts from derivations, interpolation weights from heldout,
// and the trigram on the same data. Deterministic for fixed inputs.
ModelSet train_model(const std::vector<Tree> &train_trees,
                     const std::vector<Tree> &heldout_trees,
                     const HeadRules &heads, const BinarizationRules &bins,
                     const TrainOptions &opts, TrainReport *report = nullptr);

// Trigram-equivalence variant over raw sentences.
ModelSet train_model_text(const std::vector<std::vector<std::string>> &train,
                          const std::vector<std::vector<std::string>> &heldout,
                          const TrainOptions &opts,
                          TrainReport *report = nullptr);

IdDerivation to_id_derivation(const Derivation &d, const VocabSet &vocab);
std::vector<uint32_t> to_word_ids(const std::vector<std::string> &words,
                                  const Vocabulary &vocab);

// Label vocabulary (tags + NTs) over a transformed corpus, tags first,
// each group by descending frequency then lexicographically.
VocabSet build_vocab_set(const std::vector<const BinNode *> &trees,
                         const Vocabulary &words);

}  // namespace slm

#endif  // SLM_MODEL_SET_HPP_
