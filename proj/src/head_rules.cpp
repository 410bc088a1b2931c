#include "slm/head_rules.hpp"

#include <fstream>
#include <istream>
#include <sstream>

#include "slm/errors.hpp"

namespace slm {

namespace {

// Collins/Magerman-style head table for the Penn Treebank label set.
// Priority entries ending in '*' are prefix patterns. The '*' parent line
// is the default rule for labels not listed.
const char *kDefaultHeadRules = R"(# parent direction child-priority-list
* from-left
ADJP from-left NNS QP NN $ ADVP JJ VBN VBG ADJP JJR NP JJS DT FW RBR RBS SBAR RB
ADVP from-right RB RBR RBS FW ADVP TO CD JJR JJ IN NP JJS NN
CONJP from-right CC RB IN
FRAG from-right
INTJ from-left
LST from-right LS :
NAC from-left NN NNS NNP NNPS NP NAC EX $ CD QP PRP VBG JJ JJS JJR ADJP FW
NP from-right NN* NX POS JJR NP $ ADJP PRN CD JJ JJS RB QP
NX from-right NN* NX POS JJR NP $ ADJP PRN CD JJ JJS RB QP
PP from-right IN TO VBG VBN RP FW
PRN from-left
PRT from-right RP
QP from-left $ IN NNS NN JJ RB DT CD QP JJR JJS
RRC from-right VP NP ADVP ADJP PP
S from-left TO IN VP S SBAR ADJP UCP NP
SBAR from-left WHNP WHPP WHADVP WHADJP IN DT S SQ SINV SBAR FRAG
SBARQ from-left SQ S SINV SBARQ FRAG
SINV from-left VBZ VBD VBP VB MD VP S SINV ADJP NP
SQ from-left VBZ VBD VBP VB MD VP SQ
TOP from-left S SINV SBARQ SQ FRAG
UCP from-right
VP from-left TO VB* MD VP ADJP NN NNS NP
WHADJP from-left CC WRB JJ ADJP
WHADVP from-right CC WRB
WHNP from-left WDT WP WP$ WHADJP WHPP WHNP
WHPP from-right IN TO FW
X from-right
)";

bool label_matches(const std::string &pattern, const std::string &label) {
  if (!pattern.empty() && pattern.back() == '*')
    return label.compare(0, pattern.size() - 1, pattern, 0,
                         pattern.size() - 1) == 0;
  return pattern == label;
}

HeadedTree percolate_rec(const Tree &t, const HeadRules &rules) {
  HeadedTree h;
  h.label = t.label;
  if (t.is_terminal()) {
    h.word = t.word;
    h.headword = t.word;
    h.headtag = t.label;
    return h;
  }
  h.children.reserve(t.children.size());
  std::vector<std::string> child_labels;
  child_labels.reserve(t.children.size());
  for (const Tree &c : t.children) {
    h.children.push_back(percolate_rec(c, rules));
    child_labels.push_back(c.label);
  }
  h.head_child = find_head(t.label, child_labels, rules);
  h.headword = h.children[h.head_child].headword;
  h.headtag = h.children[h.head_child].headtag;
  return h;
}

}  // namespace

void HeadRules::set_rule(const std::string &parent, Rule rule) {
  if (parent == "*")
    default_rule_ = std::move(rule);
  else
    rules_[parent] = std::move(rule);
}

const HeadRules::Rule &HeadRules::rule_for(const std::string &parent) const {
  auto it = rules_.find(parent);
  return it == rules_.end() ? default_rule_ : it->second;
}

HeadRules HeadRules::read(std::istream &is) {
  HeadRules hr;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    std::string parent, dir;
    if (!(ls >> parent)) continue;
    if (!(ls >> dir))
      throw ParseError("head rule without direction for " + parent, lineno);
    Rule r;
    if (dir == "from-left")
      r.direction = Direction::FromLeft;
    else if (dir == "from-right")
      r.direction = Direction::FromRight;
    else
      throw ParseError("unknown head-rule direction: " + dir, lineno);
    std::string lbl;
    while (ls >> lbl) r.priorities.push_back(lbl);
    hr.set_rule(parent, std::move(r));
  }
  return hr;
}

HeadRules HeadRules::read_file(const std::string &path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open head-rules file: " + path);
  return read(is);
}

const HeadRules &HeadRules::default_rules() {
  static const HeadRules rules = [] {
    std::istringstream is(kDefaultHeadRules);
    return read(is);
  }();
  return rules;
}

size_t find_head(const std::string &parent_label,
                 const std::vector<std::string> &child_labels,
                 const HeadRules &rules) {
  if (child_labels.empty()) throw DataError("find_head on empty child list");
  const HeadRules::Rule &rule = rules.rule_for(parent_label);
  const bool from_left = rule.direction == HeadRules::Direction::FromLeft;
  const size_t n = child_labels.size();
  for (const std::string &pat : rule.priorities) {
    for (size_t i = 0; i < n; ++i) {
      size_t idx = from_left ? i : n - 1 - i;
      if (label_matches(pat, child_labels[idx])) return idx;
    }
  }
  return from_left ? 0 : n - 1;
}

HeadedTree percolate(const Tree &tree, const HeadRules &rules) {
  return percolate_rec(tree, rules);
}

}  // namespace slm
