#ifndef SLM_DERIVATION_HPP_
#define SLM_DERIVATION_HPP_

#include <string>
#include <vector>

#include "slm/binarize.hpp"

namespace slm {

enum class OpKind : uint8_t { AdjoinLeft = 0, AdjoinRight = 1, Null = 2 };

const char *op_kind_name(OpKind k);

// One constructor action. Null carries no label.
struct ConstructorOp {
  OpKind kind = OpKind::Null;
  std::string nt_label;  // empty for Null

  bool operator==(const ConstructorOp &o) const {
    return kind == o.kind && nt_label == o.nt_label;
  }
};

// Per sentence position: the shifted word and tag, then the constructor
// ops executed before control returns to the predictor. The op list ends
// with exactly one Null and contains no other Null.
struct DerivationStep {
  std::string word;
  std::string tag;
  std::vector<ConstructorOp> ops;

  bool operator==(const DerivationStep &o) const {
    return word == o.word && tag == o.tag && ops == o.ops;
  }
};

struct Derivation {
  std::vector<DerivationStep> steps;

  size_t adjoin_count() const;
  bool operator==(const Derivation &o) const { return steps == o.steps; }
};

// Left-to-right derivation of a strictly binary tree: at each position,
// after the shift, one adjoin per internal node whose rightmost terminal is
// that position, ordered bottom-up; adjoin-left when the node's headword
// comes from its left child. Throws DataError on nodes of arity != 2.
Derivation tree_to_derivation(const BinNode &root);

// Inverse of tree_to_derivation; headwords are re-derived from op kinds.
// Throws DataError on malformed op sequences (adjoin with fewer than two
// stack entries, or a forest left at the end).
std::unique_ptr<BinNode> derivation_to_tree(const Derivation &d);

// The flat derivation with no adjoins: every position's op list is a bare
// Null, so the exposed heads at position k are exactly the two previous
// words. This is the training-side counterpart of a parse that stays
// right-branching (all of its adjoins fall at the last position).
Derivation right_branching_derivation(const std::vector<std::string> &words,
                                      const std::string &tag);

}  // namespace slm

#endif  // SLM_DERIVATION_HPP_
