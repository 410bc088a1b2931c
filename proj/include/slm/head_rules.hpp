#ifndef SLM_HEAD_RULES_HPP_
#define SLM_HEAD_RULES_HPP_

#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

#include "slm/tree.hpp"

namespace slm {

// Headword percolation rules: per parent label, a search direction and a
// priority list of child labels. Priority entries may end in '*' for prefix
// matching ("VB*"). The '*' parent entry is the default rule, which makes
// lookup total: when no priority entry matches, the first child in search
// order is the head.
class HeadRules {
 public:
  enum class Direction { FromLeft, FromRight };

  struct Rule {
    Direction direction = Direction::FromLeft;
    std::vector<std::string> priorities;
  };

  void set_rule(const std::string &parent, Rule rule);
  const Rule &rule_for(const std::string &parent) const;

  // File format, one rule per line:
  //   PARENT from-left|from-right [LABEL1 LABEL2 ...]
  // '#' starts a comment. The PARENT "*" sets the default rule.
  static HeadRules read(std::istream &is);
  static HeadRules read_file(const std::string &path);

  // Collins/Magerman-style table for the Penn Treebank label set.
  static const HeadRules &default_rules();

 private:
  std::unordered_map<std::string, Rule> rules_;
  Rule default_rule_;
};

// Index of the head child among childLabels. Total for nonempty input.
size_t find_head(const std::string &parent_label,
                 const std::vector<std::string> &child_labels,
                 const HeadRules &rules);

// Tree annotated with a percolated headword/head tag at every node.
struct HeadedTree {
  std::string label;
  std::string word;  // terminals only
  std::string headword;
  std::string headtag;
  size_t head_child = 0;
  std::vector<HeadedTree> children;

  bool is_terminal() const { return children.empty(); }
};

// Annotates every node with its rule-selected headword and head tag.
HeadedTree percolate(const Tree &tree, const HeadRules &rules);

}  // namespace slm

#endif  // SLM_HEAD_RULES_HPP_
