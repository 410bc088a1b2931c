#include "slm/binarize.hpp"

#include <cctype>
#include <fstream>
#include <istream>
#include <sstream>

#include "slm/errors.hpp"

namespace slm {

namespace {

const char *kDefaultBinarizationRules =
    "# label head-left-first|head-right-first\n"
    "* head-right-first\n";

void display_rec(const BinNode &n, std::string &out) {
  out.push_back('(');
  if (n.is_leaf()) {
    out += n.tag;
    out.push_back(' ');
    out += n.word;
  } else {
    out += n.label;
    out.push_back('_');
    for (char c : n.headword) out.push_back((char)std::toupper((unsigned char)c));
    if (n.left) {
      out.push_back(' ');
      display_rec(*n.left, out);
    }
    if (n.right) {
      out.push_back(' ');
      display_rec(*n.right, out);
    }
  }
  out.push_back(')');
}

}  // namespace

EnrichScheme parse_scheme(const std::string &name) {
  if (name == "baseline") return EnrichScheme::Baseline;
  if (name == "same") return EnrichScheme::Same;
  if (name == "opposite") return EnrichScheme::Opposite;
  if (name == "both") return EnrichScheme::Both;
  throw ConfigError("unknown enrichment scheme: " + name +
                    " (expected baseline|same|opposite|both)");
}

const char *scheme_name(EnrichScheme s) {
  switch (s) {
    case EnrichScheme::Baseline: return "baseline";
    case EnrichScheme::Same: return "same";
    case EnrichScheme::Opposite: return "opposite";
    case EnrichScheme::Both: return "both";
  }
  return "?";
}

BinarizationRules::Scheme BinarizationRules::scheme_for(
    const std::string &label) const {
  auto it = rules_.find(label);
  return it == rules_.end() ? default_scheme_ : it->second;
}

BinarizationRules BinarizationRules::read(std::istream &is) {
  BinarizationRules br;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    std::string label, scheme;
    if (!(ls >> label)) continue;
    if (!(ls >> scheme))
      throw ParseError("binarization rule without scheme for " + label,
                       lineno);
    Scheme s;
    if (scheme == "head-left-first")
      s = Scheme::HeadLeftFirst;
    else if (scheme == "head-right-first")
      s = Scheme::HeadRightFirst;
    else
      throw ParseError("unknown binarization scheme: " + scheme, lineno);
    if (label == "*")
      br.default_scheme_ = s;
    else
      br.rules_[label] = s;
  }
  return br;
}

BinarizationRules BinarizationRules::read_file(const std::string &path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open binarization-rules file: " + path);
  return read(is);
}

const BinarizationRules &BinarizationRules::default_rules() {
  static const BinarizationRules rules = [] {
    std::istringstream is(kDefaultBinarizationRules);
    return read(is);
  }();
  return rules;
}

std::unique_ptr<BinNode> BinNode::leaf(std::string word, std::string tag) {
  auto n = std::make_unique<BinNode>();
  n->word = std::move(word);
  n->tag = std::move(tag);
  n->headword = n->word;
  n->headtag = n->tag;
  return n;
}

std::unique_ptr<BinNode> BinNode::node(std::string label,
                                       std::unique_ptr<BinNode> l,
                                       std::unique_ptr<BinNode> r,
                                       bool head_left) {
  auto n = std::make_unique<BinNode>();
  n->label = std::move(label);
  n->head_left = head_left;
  const BinNode &head = head_left ? *l : *r;
  n->headword = head.headword;
  n->headtag = head.headtag;
  n->left = std::move(l);
  n->right = std::move(r);
  return n;
}

std::unique_ptr<BinNode> BinNode::clone() const {
  auto n = std::make_unique<BinNode>();
  n->label = label;
  n->headword = headword;
  n->headtag = headtag;
  n->word = word;
  n->tag = tag;
  n->head_left = head_left;
  if (left) n->left = left->clone();
  if (right) n->right = right->clone();
  return n;
}

bool BinNode::equal(const BinNode &o) const {
  if (label != o.label || headword != o.headword || headtag != o.headtag ||
      word != o.word || tag != o.tag)
    return false;
  if (left && right && head_left != o.head_left) return false;
  if ((left == nullptr) != (o.left == nullptr)) return false;
  if ((right == nullptr) != (o.right == nullptr)) return false;
  if (left && !left->equal(*o.left)) return false;
  if (right && !right->equal(*o.right)) return false;
  return true;
}

std::unique_ptr<BinNode> binarize(const HeadedTree &t,
                                  const BinarizationRules &rules) {
  if (t.is_terminal()) return BinNode::leaf(t.word, t.label);

  std::vector<std::unique_ptr<BinNode>> kids;
  kids.reserve(t.children.size());
  for (const HeadedTree &c : t.children) kids.push_back(binarize(c, rules));

  const size_t n = kids.size();
  const size_t k = t.head_child;
  if (n == 1) {
    auto u = std::make_unique<BinNode>();
    u->label = t.label;
    u->headword = t.headword;
    u->headtag = t.headtag;
    u->left = std::move(kids[0]);
    return u;
  }
  if (n == 2) {
    return BinNode::node(t.label, std::move(kids[0]), std::move(kids[1]),
                         k == 0);
  }

  // Spine of Z'-labeled nodes around the head; the outermost node keeps Z.
  const std::string primed = t.label + "'";
  const bool lefts_first =
      rules.scheme_for(t.label) == BinarizationRules::Scheme::HeadLeftFirst;
  std::unique_ptr<BinNode> spine = std::move(kids[k]);
  size_t li = k, ri = k;  // next unattached sibling on each side
  size_t remaining = n - 1;
  auto attach_left = [&] {
    --li;
    spine = BinNode::node(--remaining == 0 ? t.label : primed,
                          std::move(kids[li]), std::move(spine), false);
  };
  auto attach_right = [&] {
    ++ri;
    spine = BinNode::node(--remaining == 0 ? t.label : primed,
                          std::move(spine), std::move(kids[ri]), true);
  };
  if (lefts_first) {
    while (li > 0) attach_left();
    while (ri + 1 < n) attach_right();
  } else {
    while (ri + 1 < n) attach_right();
    while (li > 0) attach_left();
  }
  return spine;
}

namespace {

// Returns the node's pre-enrichment label for the parent to read: the NT
// label for internal nodes, the POS tag for leaves.
std::string pre_enrich_label(const BinNode &n) {
  return n.is_leaf() ? n.tag : n.label;
}

void enrich_rec(BinNode &n, EnrichScheme scheme) {
  if (n.is_leaf() || scheme == EnrichScheme::Baseline) {
    if (n.left) enrich_rec(*n.left, scheme);
    if (n.right) enrich_rec(*n.right, scheme);
    return;
  }
  std::string head_lbl, sib_lbl;
  if (n.is_unary()) {
    head_lbl = sib_lbl = pre_enrich_label(*n.left);
  } else {
    head_lbl = pre_enrich_label(n.head_left ? *n.left : *n.right);
    sib_lbl = pre_enrich_label(n.head_left ? *n.right : *n.left);
  }
  std::string enriched = n.label;
  switch (scheme) {
    case EnrichScheme::Same:
      enriched += "+" + head_lbl;
      break;
    case EnrichScheme::Opposite:
      enriched += "+" + sib_lbl;
      break;
    case EnrichScheme::Both:
      if (n.is_unary())
        enriched += "+" + head_lbl;
      else
        enriched += "+" + head_lbl + "+" + sib_lbl;
      break;
    case EnrichScheme::Baseline:
      break;
  }
  if (n.left) enrich_rec(*n.left, scheme);
  if (n.right) enrich_rec(*n.right, scheme);
  n.label = std::move(enriched);
}

}  // namespace

void enrich(BinNode &node, EnrichScheme scheme) { enrich_rec(node, scheme); }

std::unique_ptr<BinNode> collapse_unary(std::unique_ptr<BinNode> node) {
  if (!node || node->is_leaf()) return node;
  node->left = collapse_unary(std::move(node->left));
  node->right = collapse_unary(std::move(node->right));
  if (node->is_unary()) return std::move(node->left);
  return node;
}

std::unique_ptr<BinNode> transform_tree(const Tree &tree,
                                        const HeadRules &heads,
                                        const BinarizationRules &bins,
                                        EnrichScheme scheme) {
  HeadedTree headed = percolate(tree, heads);
  std::unique_ptr<BinNode> bin = binarize(headed, bins);
  enrich(*bin, scheme);
  return collapse_unary(std::move(bin));
}

std::string display_tree(const BinNode &node) {
  std::string out;
  display_rec(node, out);
  return out;
}

void bin_yield(const BinNode &node,
               std::vector<std::pair<std::string, std::string>> &out) {
  if (node.is_leaf()) {
    out.emplace_back(node.word, node.tag);
    return;
  }
  if (node.left) bin_yield(*node.left, out);
  if (node.right) bin_yield(*node.right, out);
}

void collect_nt_labels(const BinNode &node, std::vector<std::string> &out) {
  if (node.is_leaf()) return;
  out.push_back(node.label);
  if (node.left) collect_nt_labels(*node.left, out);
  if (node.right) collect_nt_labels(*node.right, out);
}

}  // namespace slm
