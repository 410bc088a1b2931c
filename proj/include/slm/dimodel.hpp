#ifndef SLM_DIMODEL_HPP_
#define SLM_DIMODEL_HPP_

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace slm {

constexpr size_t kMaxContextFeatures = 4;

// Fixed-capacity context tuple (a prefix of a component's feature vector).
struct CtxKey {
  std::array<uint32_t, kMaxContextFeatures> f{};
  uint8_t n = 0;

  CtxKey() = default;
  CtxKey(std::span<const uint32_t> feats, size_t len) : n((uint8_t)len) {
    for (size_t i = 0; i < len; ++i) f[i] = feats[i];
  }
  bool operator==(const CtxKey &o) const {
    if (n != o.n) return false;
    for (size_t i = 0; i < n; ++i)
      if (f[i] != o.f[i]) return false;
    return true;
  }
  bool operator<(const CtxKey &o) const;
};

struct CtxKeyHash {
  size_t operator()(const CtxKey &k) const {
    uint64_t h = 0x9e3779b97f4a7c15ull ^ k.n;
    for (size_t i = 0; i < k.n; ++i) {
      h ^= k.f[i] + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
      h *= 0xff51afd7ed558ccdull;
    }
    return (size_t)h;
  }
};

// Deleted-interpolation back-off model over a feature-prefix chain.
//
// A component with N context features has N+1 count levels; level i
// conditions on the first N-i features, so level N is the empty context,
// and below it sits a uniform floor over the outcome vocabulary. Each
// level mixes its maximum-likelihood estimate with the coarser levels:
//
//   p_i(o|c) = lambda_i(b) * count_i(c,o)/total_i(c) + (1-lambda_i(b)) * p_{i+1}(o|c)
//
// where the interpolation weight is shared across contexts in the same
// bucket b = floor(log2(total+1)). Levels with zero context total are
// skipped. Counts are doubles so EM reestimation can accumulate
// fractional events.
class DIModel {
 public:
  DIModel() = default;
  DIModel(std::vector<std::string> feature_names, uint32_t num_outcomes);

  size_t num_features() const { return feature_names_.size(); }
  uint32_t num_outcomes() const { return num_outcomes_; }
  const std::vector<std::string> &feature_names() const {
    return feature_names_;
  }

  // Accumulation phase. ctx.size() must equal num_features().
  void add(std::span<const uint32_t> ctx, uint32_t outcome, double weight = 1.0);
  void merge_counts_from(const DIModel &other);  // shard merging

  // Freezes count tables, sizes the bucket-weight vectors and initializes
  // every weight to `initial_lambda`. add() is invalid afterwards.
  void finalize(double initial_lambda = 0.5);
  bool finalized() const { return finalized_; }

  double prob(std::span<const uint32_t> ctx, uint32_t outcome) const;

  // All outcomes with nonzero counts at any level for this context, plus
  // the shared probability of every other outcome. Exact: absent outcomes
  // all back off to the same value.
  struct SparseDist {
    std::vector<std::pair<uint32_t, double>> present;  // sorted by outcome
    double absent_prob = 0.0;
  };
  SparseDist distribution(std::span<const uint32_t> ctx) const;

  struct HeldoutEvent {
    CtxKey ctx;  // full feature tuple
    uint32_t outcome = 0;
    double weight = 1.0;
  };

  struct WeightEstimate {
    size_t iterations = 0;
    double heldout_loglik = 0.0;
    bool fallback_fixed = false;  // empty heldout
  };

  // EM over the bucketed interpolation weights, maximizing heldout
  // likelihood. Stops when the relative log-likelihood change drops below
  // `tol` or after `max_iter` iterations. Empty heldout keeps the fixed
  // 0.5 weights and reports fallback.
  WeightEstimate estimate_weights(const std::vector<HeldoutEvent> &heldout,
                                  double tol = 1e-6, size_t max_iter = 100);

  void set_fixed_lambdas(double value);

  // Introspection (tests, reports).
  double context_total(size_t level, std::span<const uint32_t> ctx) const;
  double count_of(size_t level, std::span<const uint32_t> ctx,
                  uint32_t outcome) const;
  size_t num_levels() const { return levels_.size(); }
  size_t level_context_count(size_t level) const;
  const std::vector<double> &lambdas(size_t level) const {
    return levels_[level].lambdas;
  }
  void set_lambda(size_t level, size_t bucket, double v);
  double total_events() const;

  static size_t bucket_of(double total);  // floor(log2(total+1))

  void write(std::ostream &os, const std::string &name) const;
  static DIModel read(std::istream &is, std::string *name = nullptr);

 private:
  struct Cell {
    double total = 0.0;
    std::vector<std::pair<uint32_t, double>> counts;  // sorted by outcome
  };
  struct Level {
    std::unordered_map<CtxKey, std::unordered_map<uint32_t, double>, CtxKeyHash>
        accum;
    std::unordered_map<CtxKey, Cell, CtxKeyHash> table;
    std::vector<double> lambdas;  // per bucket
  };

  const Cell *find_cell(size_t level, const CtxKey &key) const;
  double lambda_for(const Level &lv, double total) const;

  std::vector<std::string> feature_names_;
  uint32_t num_outcomes_ = 1;
  std::vector<Level> levels_;  // levels_[i] uses first N-i features
  bool finalized_ = false;
};

}  // namespace slm

#endif  // SLM_DIMODEL_HPP_
