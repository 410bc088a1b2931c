#include "slm/tree.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <sstream>
#include <unordered_map>

#include "slm/errors.hpp"

namespace slm {

namespace {

struct Lexer {
  std::istream &is;
  int line = 1;

  int peek() {
    skip_space();
    return is.peek();
  }
  void skip_space() {
    int c;
    while ((c = is.peek()) != EOF && std::isspace(c)) {
      if (c == '\n') ++line;
      is.get();
    }
  }
  bool expect(char c) {
    skip_space();
    if (is.peek() != c) return false;
    is.get();
    return true;
  }
  std::string atom() {
    skip_space();
    std::string s;
    int c;
    while ((c = is.peek()) != EOF && !std::isspace(c) && c != '(' && c != ')')
      s.push_back((char)is.get());
    return s;
  }
};

Tree parse_node(Lexer &lx) {
  if (!lx.expect('(')) throw ParseError("expected '('", lx.line);
  Tree node;
  node.label = lx.atom();
  int c = lx.peek();
  if (c == EOF) throw ParseError("unexpected end of input", lx.line);
  if (c == '(') {
    while (lx.peek() == '(') node.children.push_back(parse_node(lx));
    if (!lx.expect(')'))
      throw ParseError("expected ')' after children of " + node.label,
                       lx.line);
    if (node.children.empty())
      throw ParseError("internal node without children", lx.line);
    if (node.label.empty()) {
      if (node.children.size() == 1) return std::move(node.children[0]);
      throw ParseError("empty label with multiple children", lx.line);
    }
  } else if (c == ')') {
    throw ParseError("node " + node.label + " has no children", lx.line);
  } else {
    node.word = lx.atom();
    if (node.word.empty())
      throw ParseError("terminal under " + node.label + " has no word",
                       lx.line);
    if (!lx.expect(')'))
      throw ParseError("expected ')' after terminal " + node.word, lx.line);
    if (node.label.empty())
      throw ParseError("terminal " + node.word + " has empty tag", lx.line);
  }
  return node;
}

bool is_protected_label(const std::string &label) {
  return !label.empty() && label[0] == '-';  // -NONE-, -LRB-, -RRB-, ...
}

std::string strip_functional(const std::string &label) {
  if (is_protected_label(label)) return label;
  size_t cut = label.find_first_of("-=");
  return cut == std::string::npos ? label : label.substr(0, cut);
}

bool is_number_like(const std::string &w) {
  bool digit = false;
  for (char c : w) {
    if (std::isdigit((unsigned char)c))
      digit = true;
    else if (std::string(".,:/$%+-").find(c) == std::string::npos)
      return false;
  }
  return digit;
}

// Returns false when the subtree vanishes (trace or emptied internal node).
bool clean_rec(Tree &t, const CleanOptions &opts) {
  if (t.label == "-NONE-") return false;
  if (t.is_terminal()) {
    t.label = strip_functional(t.label);
    if (opts.lowercase)
      for (char &c : t.word) c = (char)std::tolower((unsigned char)c);
    if (!opts.number_token.empty() && is_number_like(t.word))
      t.word = opts.number_token;
    return true;
  }
  std::vector<Tree> kept;
  kept.reserve(t.children.size());
  for (Tree &c : t.children)
    if (clean_rec(c, opts)) kept.push_back(std::move(c));
  if (kept.empty()) return false;
  t.children = std::move(kept);
  t.label = strip_functional(t.label);
  return true;
}

void print_rec(const Tree &t, std::string &out) {
  out.push_back('(');
  out += t.label;
  if (t.is_terminal()) {
    out.push_back(' ');
    out += t.word;
  } else {
    for (const Tree &c : t.children) {
      out.push_back(' ');
      print_rec(c, out);
    }
  }
  out.push_back(')');
}

void words_rec(const Tree &t, std::vector<std::string> &out) {
  if (t.is_terminal())
    out.push_back(t.word);
  else
    for (const Tree &c : t.children) words_rec(c, out);
}

}  // namespace

std::vector<Tree> read_trees(std::istream &is) {
  Lexer lx{is};
  std::vector<Tree> trees;
  while (lx.peek() != EOF) {
    if (lx.peek() != '(')
      throw ParseError("expected '(' at top level", lx.line);
    trees.push_back(parse_node(lx));
  }
  return trees;
}

std::vector<Tree> read_trees_from_string(const std::string &text) {
  std::istringstream is(text);
  return read_trees(is);
}

std::vector<Tree> read_trees_from_file(const std::string &path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open treebank file: " + path);
  try {
    return read_trees(is);
  } catch (const ParseError &e) {
    throw DataError(path + ": " + e.what());
  }
}

bool clean_tree(Tree &tree, const CleanOptions &opts) {
  return clean_rec(tree, opts);
}

std::vector<Tree> read_clean_trees(std::istream &is, const CleanOptions &opts,
                                   ReadStats *stats) {
  std::vector<Tree> trees = read_trees(is);
  std::vector<Tree> out;
  out.reserve(trees.size());
  for (Tree &t : trees) {
    if (clean_tree(t, opts))
      out.push_back(std::move(t));
    else if (stats)
      ++stats->skipped_empty;
  }
  if (stats) stats->sentences += out.size();
  return out;
}

std::vector<Tree> read_clean_trees_from_file(const std::string &path,
                                             const CleanOptions &opts,
                                             ReadStats *stats) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open treebank file: " + path);
  try {
    return read_clean_trees(is, opts, stats);
  } catch (const ParseError &e) {
    throw DataError(path + ": " + e.what());
  }
}

std::string print_tree(const Tree &tree) {
  std::string out;
  print_rec(tree, out);
  return out;
}

std::vector<std::string> tree_words(const Tree &tree) {
  std::vector<std::string> out;
  words_rec(tree, out);
  return out;
}

namespace {

Vocabulary vocab_from_freq(std::unordered_map<std::string, uint64_t> freq,
                           size_t cap) {
  std::vector<std::pair<std::string, uint64_t>> items(freq.begin(),
                                                      freq.end());
  std::sort(items.begin(), items.end(), [](const auto &a, const auto &b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (items.size() > cap) items.resize(cap);
  Vocabulary v;
  for (const auto &[w, c] : items) v.add(w, c);
  return v;
}

}  // namespace

Vocabulary build_word_vocab(const std::vector<Tree> &trees, size_t cap) {
  if (cap < 1) throw ConfigError("word vocabulary cap must be >= 1");
  if (trees.empty()) throw DataError("cannot build vocabulary: no trees");
  std::unordered_map<std::string, uint64_t> freq;
  for (const Tree &t : trees)
    for (const std::string &w : tree_words(t)) ++freq[w];
  return vocab_from_freq(std::move(freq), cap);
}

Vocabulary build_word_vocab(const std::vector<const Tree *> &trees,
                            size_t cap) {
  if (cap < 1) throw ConfigError("word vocabulary cap must be >= 1");
  if (trees.empty()) throw DataError("cannot build vocabulary: no trees");
  std::unordered_map<std::string, uint64_t> freq;
  for (const Tree *t : trees)
    for (const std::string &w : tree_words(*t)) ++freq[w];
  return vocab_from_freq(std::move(freq), cap);
}

}  // namespace slm
