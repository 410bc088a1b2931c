#include "slm/derivation.hpp"

#include "slm/errors.hpp"

namespace slm {

const char *op_kind_name(OpKind k) {
  switch (k) {
    case OpKind::AdjoinLeft: return "adjoin-left";
    case OpKind::AdjoinRight: return "adjoin-right";
    case OpKind::Null: return "null";
  }
  return "?";
}

size_t Derivation::adjoin_count() const {
  size_t n = 0;
  for (const DerivationStep &s : steps)
    for (const ConstructorOp &op : s.ops)
      if (op.kind != OpKind::Null) ++n;
  return n;
}

namespace {

// Post-order action emission: a node's adjoin follows its right child, so
// ops land at the position of the node's rightmost terminal, bottom-up.
void emit(const BinNode &n, Derivation &d) {
  if (n.is_leaf()) {
    if (!d.steps.empty()) d.steps.back().ops.push_back({OpKind::Null, ""});
    d.steps.push_back({n.word, n.tag, {}});
    return;
  }
  if (!n.left || !n.right)
    throw DataError("tree_to_derivation requires a strictly binary tree");
  emit(*n.left, d);
  emit(*n.right, d);
  d.steps.back().ops.push_back(
      {n.head_left ? OpKind::AdjoinLeft : OpKind::AdjoinRight, n.label});
}

}  // namespace

Derivation tree_to_derivation(const BinNode &root) {
  Derivation d;
  emit(root, d);
  if (!d.steps.empty()) d.steps.back().ops.push_back({OpKind::Null, ""});
  return d;
}

std::unique_ptr<BinNode> derivation_to_tree(const Derivation &d) {
  std::vector<std::unique_ptr<BinNode>> stack;
  for (const DerivationStep &step : d.steps) {
    stack.push_back(BinNode::leaf(step.word, step.tag));
    for (const ConstructorOp &op : step.ops) {
      if (op.kind == OpKind::Null) continue;
      if (stack.size() < 2)
        throw DataError("adjoin with fewer than two derivation stack entries");
      auto right = std::move(stack.back());
      stack.pop_back();
      auto left = std::move(stack.back());
      stack.pop_back();
      stack.push_back(BinNode::node(op.nt_label, std::move(left),
                                    std::move(right),
                                    op.kind == OpKind::AdjoinLeft));
    }
  }
  if (stack.size() != 1)
    throw DataError("derivation does not reduce to a single root");
  return std::move(stack.back());
}

Derivation right_branching_derivation(const std::vector<std::string> &words,
                                      const std::string &tag) {
  Derivation d;
  d.steps.reserve(words.size());
  for (const std::string &w : words)
    d.steps.push_back({w, tag, {{OpKind::Null, ""}}});
  return d;
}

}  // namespace slm
