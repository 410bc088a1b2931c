#ifndef SLM_TESTS_ORACLES_HPP_
#define SLM_TESTS_ORACLES_HPP_

// Brute-force reference implementations, independent of the library's
// count tables, beam search and EM code paths. Everything here favors
// naive enumeration and linear scans over cleverness.

#include <map>
#include <memory>
#include <vector>

#include "slm/model_set.hpp"

namespace slm::testing {

// --- Deleted-interpolation probability by direct definition -----------------

struct RawEvent {
  std::vector<uint32_t> ctx;  // full feature tuple
  uint32_t outcome;
  double weight = 1.0;
};

// Recursive interpolation computed from raw event scans; interpolation
// weights are read from the model under test (the arithmetic and counting
// are the independent part).
double oracle_di_prob(const std::vector<RawEvent> &events,
                      const DIModel &weights_from, size_t num_features,
                      uint32_t num_outcomes, const std::vector<uint32_t> &ctx,
                      uint32_t outcome);

// --- Exhaustive word-parse enumeration ---------------------------------------

// A partial parse as an explicit forest of binary trees.
struct OracleTree {
  bool leaf = true;
  uint32_t word = 0;
  uint32_t tag = 0;    // label id (leaves)
  uint32_t label = 0;  // label id (internal)
  bool head_left = true;
  std::shared_ptr<OracleTree> l, r;
};

struct OracleEvent {
  char component;  // 'p' predictor, 't' tagger, 'c' constructor
  std::vector<uint32_t> ctx;
  uint32_t outcome;
};

struct OracleState {
  std::vector<std::shared_ptr<OracleTree>> forest;
  double prob = 1.0;
  std::vector<OracleEvent> events;  // every factor multiplied so far
};

ExposedHead oracle_head_of(const OracleTree &t);

// All word-parse k-prefix states for the full word sequence, by direct
// recursion over tags and op sequences (no merging, no pruning).
std::vector<OracleState> oracle_enumerate(const ModelSet &model,
                                          const std::vector<uint32_t> &words);

// One-word extension of a state set (oracle_enumerate is its fold).
std::vector<OracleState> oracle_advance(const ModelSet &model,
                                        const std::vector<OracleState> &states,
                                        uint32_t word);

// Posterior-weighted predictive probability from an enumerated state set.
double oracle_next_word_prob(const ModelSet &model,
                             const std::vector<OracleState> &states,
                             uint32_t word);

// The full predictive distribution over the word vocabulary, grouping
// state mass by exposed-head pair (the predictor conditions only on the
// two exposed heads, so the grouping is exact).
std::vector<double> oracle_next_word_distribution(
    const ModelSet &model, const std::vector<OracleState> &states);

// Number of distinct exposed-head stacks in a state set (what a merged
// decoder stack would hold).
size_t oracle_distinct_stacks(const std::vector<OracleState> &states);

// ln of the total probability mass of a state set.
double oracle_log_mass(const std::vector<OracleState> &states);

// Completes every state with the sentence-end predictor factor and returns
// expected fractional counts of a full EM step, keyed by
// (component, context, outcome).
std::map<std::tuple<char, std::vector<uint32_t>, uint32_t>, double>
oracle_em_expected_counts(const ModelSet &model,
                          const std::vector<std::vector<uint32_t>> &corpus,
                          double *total_loglik = nullptr);

}  // namespace slm::testing

#endif  // SLM_TESTS_ORACLES_HPP_
