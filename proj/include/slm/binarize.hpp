#ifndef SLM_BINARIZE_HPP_
#define SLM_BINARIZE_HPP_

#include <iosfwd>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "slm/head_rules.hpp"

namespace slm {

// Label-enrichment schemes for binarized nodes. Baseline leaves labels as
// produced by binarization.
enum class EnrichScheme { Baseline, Same, Opposite, Both };

EnrichScheme parse_scheme(const std::string &name);  // ConfigError on bad name
const char *scheme_name(EnrichScheme s);

// Per-label choice between the two binarization spine orders:
//   head-left-first  : attach the head's left siblings innermost-first,
//                      then its right siblings;
//   head-right-first : the mirror (right siblings first, then left).
// head-right-first yields right-branching spines and is the default.
class BinarizationRules {
 public:
  enum class Scheme { HeadLeftFirst, HeadRightFirst };

  void set_scheme(const std::string &label, Scheme s) { rules_[label] = s; }
  Scheme scheme_for(const std::string &label) const;

  // File format: "LABEL head-left-first|head-right-first" per line; the
  // LABEL "*" sets the default. '#' starts a comment.
  static BinarizationRules read(std::istream &is);
  static BinarizationRules read_file(const std::string &path);
  static const BinarizationRules &default_rules();

 private:
  std::unordered_map<std::string, Scheme> rules_;
  Scheme default_scheme_ = Scheme::HeadRightFirst;
};

// Binary (or transiently unary) head-annotated tree. Leaves carry the
// terminal word and POS tag; internal nodes carry an NT label, which after
// enrichment has the "A+B" or "A+B+C" form with the base label recoverable
// as the prefix before the first '+'.
struct BinNode {
  std::string label;  // internal nodes
  std::string headword;
  std::string headtag;
  std::string word;  // leaves
  std::string tag;   // leaves
  bool head_left = true;  // headword comes from the left child
  std::unique_ptr<BinNode> left;
  std::unique_ptr<BinNode> right;  // null for unary nodes

  bool is_leaf() const { return !left && !right; }
  bool is_unary() const { return left && !right; }

  static std::unique_ptr<BinNode> leaf(std::string word, std::string tag);
  static std::unique_ptr<BinNode> node(std::string label,
                                       std::unique_ptr<BinNode> l,
                                       std::unique_ptr<BinNode> r,
                                       bool head_left);
  std::unique_ptr<BinNode> clone() const;
  bool equal(const BinNode &o) const;
};

// Converts every n-ary constituent (n >= 3) into a binary spine of
// intermediate nodes labeled Z' (base label + "'"); the created nodes keep
// the constituent's headword. Unary constituents pass through unchanged.
std::unique_ptr<BinNode> binarize(const HeadedTree &tree,
                                  const BinarizationRules &rules);

// Relabels every internal node as parent+child using the child's
// pre-enrichment label: the head child (Same), the non-head child
// (Opposite), or "parent+head+sibling" (Both). Unary nodes fall back to the
// single child's label under every scheme. Baseline is the identity.
void enrich(BinNode &node, EnrichScheme scheme);

// Removes unary chains bottom-up: a unary node is replaced by its child.
// The result is strictly binary (or a bare leaf), which is what the
// derivation machinery requires. May return a leaf for one-word sentences.
std::unique_ptr<BinNode> collapse_unary(std::unique_ptr<BinNode> node);

// Full transform: percolate + binarize + enrich + collapse_unary.
std::unique_ptr<BinNode> transform_tree(const Tree &tree,
                                        const HeadRules &heads,
                                        const BinarizationRules &bins,
                                        EnrichScheme scheme);

// Single-line "(NT_HEADWORD ... (TAG word) ...)" display form, headwords
// uppercased.
std::string display_tree(const BinNode &node);

// Leaf (word, tag) pairs, left to right.
void bin_yield(const BinNode &node,
               std::vector<std::pair<std::string, std::string>> &out);

// Distinct internal-node labels (the NT vocabulary of a transformed corpus).
void collect_nt_labels(const BinNode &node, std::vector<std::string> &out);

}  // namespace slm

#endif  // SLM_BINARIZE_HPP_
