#ifndef SLM_TREE_HPP_
#define SLM_TREE_HPP_

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "slm/vocab.hpp"

namespace slm {

// N-ary constituency tree. A node is either a terminal (word set, no
// children) or internal (>=1 children, no word).
struct Tree {
  std::string label;
  std::string word;            // terminals only
  std::vector<Tree> children;  // empty for terminals

  bool is_terminal() const { return children.empty(); }

  static Tree terminal(std::string tag, std::string w) {
    Tree t;
    t.label = std::move(tag);
    t.word = std::move(w);
    return t;
  }
  static Tree internal(std::string label, std::vector<Tree> children) {
    Tree t;
    t.label = std::move(label);
    t.children = std::move(children);
    return t;
  }

  bool operator==(const Tree &o) const {
    return label == o.label && word == o.word && children == o.children;
  }
};

struct CleanOptions {
  bool lowercase = true;
  // When nonempty, tokens that contain a digit and consist only of
  // [0-9.,:/$%+-] are replaced by this token.
  std::string number_token;
};

struct ReadStats {
  size_t sentences = 0;        // trees returned
  size_t skipped_empty = 0;    // sentences dropped after cleaning
};

// Reads zero or more bracketed s-expressions in Penn Treebank style.
// A top-level "( (S ...) )" wrapper with an empty label and one child is
// unwrapped. Throws ParseError on unbalanced or malformed input.
std::vector<Tree> read_trees(std::istream &is);
std::vector<Tree> read_trees_from_string(const std::string &text);
std::vector<Tree> read_trees_from_file(const std::string &path);

// Removes trace subtrees (label "-NONE-") and any nodes left childless,
// strips functional-tag suffixes ("NP-SBJ" -> "NP", "NP=2" -> "NP"; labels
// beginning with '-' such as "-LRB-" are kept verbatim), and normalizes
// terminal words per options. Returns false when nothing survives.
bool clean_tree(Tree &tree, const CleanOptions &opts = {});

// read_trees + clean_tree over a whole stream; drops empty results.
std::vector<Tree> read_clean_trees(std::istream &is, const CleanOptions &opts,
                                   ReadStats *stats = nullptr);
std::vector<Tree> read_clean_trees_from_file(const std::string &path,
                                             const CleanOptions &opts,
                                             ReadStats *stats = nullptr);

// Single-line bracketed form; re-readable by read_trees.
std::string print_tree(const Tree &tree);

// Terminal words, left to right.
std::vector<std::string> tree_words(const Tree &tree);

// Most-frequent `cap` word types over the terminals of `trees` (ties broken
// lexicographically), plus the reserved markers. cap < 1 is a ConfigError.
Vocabulary build_word_vocab(const std::vector<Tree> &trees, size_t cap);
Vocabulary build_word_vocab(const std::vector<const Tree *> &trees, size_t cap);

}  // namespace slm

#endif  // SLM_TREE_HPP_
