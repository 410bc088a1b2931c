#ifndef SLM_TESTS_FIXTURES_HPP_
#define SLM_TESTS_FIXTURES_HPP_

#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "slm/head_rules.hpp"
#include "slm/model_set.hpp"

namespace slm::testing {

// Penn-style snippets from a worked noun-phrase example.
inline const char *kNpExample =
    "(NP (DT the) (NNP dutch) (VBG publishing) (NN group))";
inline const char *kNpBinarized =
    "(NP_GROUP (DT the) (NP'_GROUP (NNP dutch) (NP'_GROUP (VBG publishing) "
    "(NN group))))";
inline const char *kNpSame =
    "(NP+NP'_GROUP (DT the) (NP'+NP'_GROUP (NNP dutch) (NP'+NN_GROUP (VBG "
    "publishing) (NN group))))";
inline const char *kNpOpposite =
    "(NP+DT_GROUP (DT the) (NP'+NNP_GROUP (NNP dutch) (NP'+VBG_GROUP (VBG "
    "publishing) (NN group))))";

// Strictly binary toy treebank: words a..e, tags A/B, NT labels X/Y/Z.
// Keeps the NT vocabulary at three labels (no primes are introduced).
inline const char *kTinyTreebank = R"(
(X (A a) (B b))
(Y (X (A a) (B c)) (B b))
(Z (A d) (Y (A c) (B e)))
(X (Y (B b) (A a)) (Z (B d) (B e)))
(Y (A e) (B a))
(Z (X (B c) (A d)) (A b))
(X (A b) (Y (B c) (A a)))
(Y (Z (A d) (B a)) (X (A e) (B c)))
)";

// Mixed head directions so the toy corpus exercises both adjoin kinds.
inline HeadRules tiny_head_rules() {
  std::istringstream is(
      "X from-right\n"
      "Y from-left\n"
      "Z from-right\n"
      "* from-left\n");
  return HeadRules::read(is);
}

inline std::vector<Tree> tiny_trees() {
  std::vector<Tree> trees = read_trees_from_string(kTinyTreebank);
  for (Tree &t : trees) clean_tree(t);
  return trees;
}

inline ModelSet tiny_model(EnrichScheme scheme = EnrichScheme::Baseline,
                           size_t heldout_period = 4) {
  TrainOptions opts;
  opts.scheme = scheme;
  opts.vocab_cap = 100;
  opts.heldout_period = heldout_period;
  return train_model(tiny_trees(), {}, tiny_head_rules(),
                     BinarizationRules::default_rules(), opts);
}

// Deterministic synthetic sentences with enough structure for nontrivial
// n-gram statistics.
inline std::vector<std::vector<std::string>> synth_corpus(size_t n_sentences,
                                                          unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_int_distribution<int> len_dist(5, 12);
  std::uniform_int_distribution<int> jump(0, 6);
  std::vector<std::vector<std::string>> out;
  out.reserve(n_sentences);
  int state = 0;
  for (size_t i = 0; i < n_sentences; ++i) {
    int len = len_dist(rng);
    std::vector<std::string> words;
    words.reserve(len);
    for (int k = 0; k < len; ++k) {
      state = (state * 5 + jump(rng)) % 25;
      words.push_back("w" + std::to_string(state));
    }
    out.push_back(std::move(words));
  }
  return out;
}

}  // namespace slm::testing

#endif  // SLM_TESTS_FIXTURES_HPP_
