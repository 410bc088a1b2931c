#include "slm/dimodel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "slm/errors.hpp"

namespace slm {

namespace {

constexpr double kMaxLambda = 1.0 - 1e-6;  // keeps the uniform floor reachable

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

bool CtxKey::operator<(const CtxKey &o) const {
  if (n != o.n) return n < o.n;
  for (size_t i = 0; i < n; ++i)
    if (f[i] != o.f[i]) return f[i] < o.f[i];
  return false;
}

DIModel::DIModel(std::vector<std::string> feature_names, uint32_t num_outcomes)
    : feature_names_(std::move(feature_names)), num_outcomes_(num_outcomes) {
  if (feature_names_.size() > kMaxContextFeatures)
    throw ConfigError("too many context features");
  if (num_outcomes_ == 0) throw ConfigError("empty outcome vocabulary");
  levels_.resize(feature_names_.size() + 1);
}

void DIModel::add(std::span<const uint32_t> ctx, uint32_t outcome,
                  double weight) {
  if (finalized_) throw DataError("add() on a finalized model");
  if (ctx.size() != num_features()) throw DataError("context arity mismatch");
  const size_t N = num_features();
  for (size_t i = 0; i <= N; ++i) {
    CtxKey key(ctx, N - i);
    levels_[i].accum[key][outcome] += weight;
  }
}

void DIModel::merge_counts_from(const DIModel &other) {
  if (finalized_) throw DataError("merge into a finalized model");
  for (size_t i = 0; i < levels_.size(); ++i)
    for (const auto &[key, outcomes] : other.levels_[i].accum)
      for (const auto &[o, w] : outcomes) levels_[i].accum[key][o] += w;
}

void DIModel::finalize(double initial_lambda) {
  if (finalized_) return;
  for (Level &lv : levels_) {
    size_t max_bucket = 0;
    for (auto &[key, outcomes] : lv.accum) {
      Cell cell;
      cell.counts.assign(outcomes.begin(), outcomes.end());
      std::sort(cell.counts.begin(), cell.counts.end());
      for (const auto &[o, w] : cell.counts) cell.total += w;
      max_bucket = std::max(max_bucket, bucket_of(cell.total));
      lv.table.emplace(key, std::move(cell));
    }
    lv.accum.clear();
    lv.lambdas.assign(lv.table.empty() ? 0 : max_bucket + 1, initial_lambda);
  }
  finalized_ = true;
}

size_t DIModel::bucket_of(double total) {
  if (total <= 0.0) return 0;
  return (size_t)std::floor(std::log2(total + 1.0));
}

const DIModel::Cell *DIModel::find_cell(size_t level, const CtxKey &key) const {
  auto it = levels_[level].table.find(key);
  return it == levels_[level].table.end() ? nullptr : &it->second;
}

double DIModel::lambda_for(const Level &lv, double total) const {
  if (total <= 0.0) return 0.0;  // unseen context: pure back-off
  size_t b = bucket_of(total);
  if (b >= lv.lambdas.size()) b = lv.lambdas.size() - 1;
  return lv.lambdas[b];
}

double DIModel::prob(std::span<const uint32_t> ctx, uint32_t outcome) const {
  if (!finalized_) throw DataError("prob() on a non-finalized model");
  if (ctx.size() != num_features()) throw DataError("context arity mismatch");
  const size_t N = num_features();
  double p = 1.0 / num_outcomes_;
  for (size_t i = N + 1; i-- > 0;) {  // coarsest level first
    const Cell *cell = find_cell(i, CtxKey(ctx, N - i));
    if (!cell || cell->total <= 0.0) continue;
    double lambda = lambda_for(levels_[i], cell->total);
    auto it = std::lower_bound(
        cell->counts.begin(), cell->counts.end(), outcome,
        [](const std::pair<uint32_t, double> &a, uint32_t b) {
          return a.first < b;
        });
    double c = (it != cell->counts.end() && it->first == outcome) ? it->second
                                                                  : 0.0;
    p = lambda * (c / cell->total) + (1.0 - lambda) * p;
  }
  return p;
}

DIModel::SparseDist DIModel::distribution(std::span<const uint32_t> ctx) const {
  if (!finalized_) throw DataError("distribution() on a non-finalized model");
  const size_t N = num_features();
  SparseDist dist;
  // Outcomes observed at any level of this context chain.
  std::vector<uint32_t> present;
  for (size_t i = 0; i <= N; ++i) {
    const Cell *cell = find_cell(i, CtxKey(ctx, N - i));
    if (!cell) continue;
    for (const auto &[o, w] : cell->counts) present.push_back(o);
  }
  std::sort(present.begin(), present.end());
  present.erase(std::unique(present.begin(), present.end()), present.end());
  dist.present.reserve(present.size());
  for (uint32_t o : present) dist.present.emplace_back(o, prob(ctx, o));
  // Every other outcome backs off identically at every level.
  double p = 1.0 / num_outcomes_;
  for (size_t i = N + 1; i-- > 0;) {
    const Cell *cell = find_cell(i, CtxKey(ctx, N - i));
    if (!cell || cell->total <= 0.0) continue;
    p = (1.0 - lambda_for(levels_[i], cell->total)) * p;
  }
  dist.absent_prob = p;
  return dist;
}

void DIModel::set_fixed_lambdas(double value) {
  for (Level &lv : levels_)
    for (double &l : lv.lambdas) l = value;
}

void DIModel::set_lambda(size_t level, size_t bucket, double v) {
  levels_.at(level).lambdas.at(bucket) = v;
}

double DIModel::context_total(size_t level, std::span<const uint32_t> ctx) const {
  const Cell *cell = find_cell(level, CtxKey(ctx, ctx.size()));
  return cell ? cell->total : 0.0;
}

double DIModel::count_of(size_t level, std::span<const uint32_t> ctx,
                         uint32_t outcome) const {
  const Cell *cell = find_cell(level, CtxKey(ctx, ctx.size()));
  if (!cell) return 0.0;
  for (const auto &[o, w] : cell->counts)
    if (o == outcome) return w;
  return 0.0;
}

size_t DIModel::level_context_count(size_t level) const {
  return levels_[level].table.size();
}

double DIModel::total_events() const {
  // The empty-context level sees every event exactly once.
  const Level &lv = levels_.back();
  double t = 0.0;
  for (const auto &[key, cell] : lv.table) t += cell.total;
  return t;
}

DIModel::WeightEstimate DIModel::estimate_weights(
    const std::vector<HeldoutEvent> &heldout, double tol, size_t max_iter) {
  if (!finalized_) throw DataError("estimate_weights on non-finalized model");
  WeightEstimate est;
  if (heldout.empty()) {
    set_fixed_lambdas(0.5);
    est.fallback_fixed = true;
    return est;
  }
  const size_t N = num_features();
  const size_t L = N + 1;  // count levels; the uniform floor sits below

  // Per event and level: bucket and ML estimate (cached; tables are fixed).
  struct EvInfo {
    std::array<double, kMaxContextFeatures + 1> ml;
    std::array<int32_t, kMaxContextFeatures + 1> bucket;  // -1: skip level
    double weight;
  };
  std::vector<EvInfo> infos(heldout.size());
  for (size_t e = 0; e < heldout.size(); ++e) {
    const HeldoutEvent &ev = heldout[e];
    EvInfo &info = infos[e];
    info.weight = ev.weight;
    std::span<const uint32_t> ctx(ev.ctx.f.data(), ev.ctx.n);
    for (size_t i = 0; i < L; ++i) {
      const Cell *cell = find_cell(i, CtxKey(ctx, N - i));
      if (!cell || cell->total <= 0.0) {
        info.bucket[i] = -1;
        info.ml[i] = 0.0;
        continue;
      }
      size_t b = bucket_of(cell->total);
      if (b >= levels_[i].lambdas.size()) b = levels_[i].lambdas.size() - 1;
      info.bucket[i] = (int32_t)b;
      double c = 0.0;
      for (const auto &[o, w] : cell->counts)
        if (o == ev.outcome) {
          c = w;
          break;
        }
      info.ml[i] = c / cell->total;
    }
  }

  std::vector<std::vector<double>> stop(L), reach(L);
  double prev_ll = -std::numeric_limits<double>::infinity();
  for (size_t iter = 1; iter <= max_iter; ++iter) {
    for (size_t i = 0; i < L; ++i) {
      stop[i].assign(levels_[i].lambdas.size(), 0.0);
      reach[i].assign(levels_[i].lambdas.size(), 0.0);
    }
    double ll = 0.0;
    for (const EvInfo &info : infos) {
      double w_stop[kMaxContextFeatures + 1];
      double remain = 1.0;
      for (size_t i = 0; i < L; ++i) {
        double lambda =
            info.bucket[i] < 0 ? 0.0 : levels_[i].lambdas[info.bucket[i]];
        w_stop[i] = remain * lambda * info.ml[i];
        remain *= (1.0 - lambda);
      }
      double p = remain / num_outcomes_;
      for (size_t i = 0; i < L; ++i) p += w_stop[i];
      ll += info.weight * std::log(p);
      double passed = 0.0;  // posterior mass of stopping above level i
      for (size_t i = 0; i < L; ++i) {
        if (info.bucket[i] >= 0) {
          double gamma = w_stop[i] / p;
          stop[i][info.bucket[i]] += info.weight * gamma;
          reach[i][info.bucket[i]] += info.weight * (1.0 - passed);
          passed += gamma;
        }
      }
    }
    for (size_t i = 0; i < L; ++i)
      for (size_t b = 0; b < levels_[i].lambdas.size(); ++b)
        if (reach[i][b] > 0.0)
          levels_[i].lambdas[b] =
              std::clamp(stop[i][b] / reach[i][b], 0.0, kMaxLambda);
    est.iterations = iter;
    est.heldout_loglik = ll;
    if (std::isfinite(prev_ll) &&
        std::abs(ll - prev_ll) <= tol * std::abs(prev_ll))
      break;
    prev_ll = ll;
  }
  return est;
}

void DIModel::write(std::ostream &os, const std::string &name) const {
  if (!finalized_) throw DataError("write() on a non-finalized model");
  os << "dimodel " << name << '\n';
  os << "features " << feature_names_.size();
  for (const std::string &f : feature_names_) os << ' ' << f;
  os << '\n';
  os << "outcomes " << num_outcomes_ << '\n';
  for (size_t i = 0; i < levels_.size(); ++i) {
    const Level &lv = levels_[i];
    os << "level " << i << " contexts " << lv.table.size() << " lambdas "
       << lv.lambdas.size();
    for (double l : lv.lambdas) os << ' ' << fmt_double(l);
    os << '\n';
    std::vector<const CtxKey *> keys;
    keys.reserve(lv.table.size());
    for (const auto &[key, cell] : lv.table) keys.push_back(&key);
    std::sort(keys.begin(), keys.end(),
              [](const CtxKey *a, const CtxKey *b) { return *a < *b; });
    for (const CtxKey *key : keys) {
      const Cell &cell = lv.table.at(*key);
      os << "ctx";
      for (size_t j = 0; j < key->n; ++j) os << ' ' << key->f[j];
      os << " : " << cell.counts.size();
      for (const auto &[o, w] : cell.counts)
        os << ' ' << o << ' ' << fmt_double(w);
      os << '\n';
    }
  }
  os << "end dimodel\n";
}

DIModel DIModel::read(std::istream &is, std::string *name_out) {
  std::string tok;
  if (!(is >> tok) || tok != "dimodel") throw DataError("expected 'dimodel'");
  std::string name;
  is >> name;
  if (name_out) *name_out = name;
  size_t nfeat = 0;
  if (!(is >> tok >> nfeat) || tok != "features")
    throw DataError("bad dimodel features line");
  std::vector<std::string> feats(nfeat);
  for (std::string &f : feats) is >> f;
  uint32_t outcomes = 0;
  if (!(is >> tok >> outcomes) || tok != "outcomes")
    throw DataError("bad dimodel outcomes line");
  DIModel m(std::move(feats), outcomes);
  const size_t N = m.num_features();
  for (size_t i = 0; i <= N; ++i) {
    size_t idx = 0, nctx = 0, nlam = 0;
    if (!(is >> tok >> idx) || tok != "level" || idx != i)
      throw DataError("bad dimodel level header");
    if (!(is >> tok >> nctx) || tok != "contexts")
      throw DataError("bad dimodel contexts field");
    if (!(is >> tok >> nlam) || tok != "lambdas")
      throw DataError("bad dimodel lambdas field");
    Level &lv = m.levels_[i];
    lv.lambdas.resize(nlam);
    for (double &l : lv.lambdas)
      if (!(is >> l)) throw DataError("bad lambda value");
    const size_t ctx_len = N - i;
    for (size_t c = 0; c < nctx; ++c) {
      if (!(is >> tok) || tok != "ctx") throw DataError("expected ctx record");
      CtxKey key;
      key.n = (uint8_t)ctx_len;
      for (size_t j = 0; j < ctx_len; ++j)
        if (!(is >> key.f[j])) throw DataError("bad ctx feature");
      if (!(is >> tok) || tok != ":") throw DataError("bad ctx separator");
      size_t nout = 0;
      is >> nout;
      Cell cell;
      cell.counts.resize(nout);
      for (auto &[o, w] : cell.counts) {
        if (!(is >> o >> w)) throw DataError("bad count record");
        cell.total += w;
      }
      lv.table.emplace(key, std::move(cell));
    }
  }
  if (!(is >> tok) || tok != "end") throw DataError("missing dimodel footer");
  is >> tok;  // "dimodel"
  std::getline(is, tok);
  m.finalized_ = true;
  return m;
}

}  // namespace slm
