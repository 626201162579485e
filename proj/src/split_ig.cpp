#include "rtree/split_ig.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rtree/parallel.hpp"

namespace rtree {

namespace {

// Entropy of a two-class group in bits; empty groups and pure groups are 0.
double entropy2(std::int64_t a, std::int64_t b) {
  const std::int64_t n = a + b;
  if (a == 0 || b == 0 || n == 0) return 0.0;
  const double pa = static_cast<double>(a) / static_cast<double>(n);
  const double pb = static_cast<double>(b) / static_cast<double>(n);
  return -(pa * std::log2(pa) + pb * std::log2(pb));
}

double gini2(std::int64_t a, std::int64_t b) {
  const std::int64_t n = a + b;
  if (n == 0) return 0.0;
  const double pa = static_cast<double>(a) / static_cast<double>(n);
  const double pb = static_cast<double>(b) / static_cast<double>(n);
  return 1.0 - pa * pa - pb * pb;
}

int label01(double y) { return y >= 0.5 ? 1 : 0; }

}  // namespace

double info_gain(const CountState& c) {
  const std::int64_t N = c.N0 + c.N1;
  if (N == 0) return 0.0;
  const std::int64_t m0 = c.N0 - c.n0;
  const std::int64_t m1 = c.N1 - c.n1;
  const std::int64_t nl = c.n0 + c.n1;
  const std::int64_t nr = m0 + m1;
  double cond = 0.0;
  if (nl > 0)
    cond += static_cast<double>(nl) / static_cast<double>(N) * entropy2(c.n0, c.n1);
  if (nr > 0)
    cond += static_cast<double>(nr) / static_cast<double>(N) * entropy2(m0, m1);
  return entropy2(c.N0, c.N1) - cond;
}

double gini_gain(const CountState& c) {
  const std::int64_t N = c.N0 + c.N1;
  if (N == 0) return 0.0;
  const std::int64_t m0 = c.N0 - c.n0;
  const std::int64_t m1 = c.N1 - c.n1;
  const std::int64_t nl = c.n0 + c.n1;
  const std::int64_t nr = m0 + m1;
  double cond = 0.0;
  if (nl > 0)
    cond += static_cast<double>(nl) / static_cast<double>(N) * gini2(c.n0, c.n1);
  if (nr > 0)
    cond += static_cast<double>(nr) / static_cast<double>(N) * gini2(m0, m1);
  return gini2(c.N0, c.N1) - cond;
}

double split_score(const CountState& c, ScoreKind kind) {
  return kind == ScoreKind::info_gain ? info_gain(c) : gini_gain(c);
}

bool adversary_prefers_left(const CountState& c, int label) {
  // Integer cross-products of n0/N0 vs n1/N1 so no rounding sneaks in.
  if (label == 0) {
    if (c.n0 >= c.N0) return false;  // nothing left to move
    return c.n0 * c.N1 < c.n1 * c.N0 && (c.n0 + 1) * c.N1 <= c.n1 * c.N0;
  }
  if (c.n1 >= c.N1) return false;
  return c.n1 * c.N0 < c.n0 * c.N1 && (c.n1 + 1) * c.N0 <= c.n0 * c.N1;
}

AdversarialCounts find_adversarial_counts(std::int64_t N0, std::int64_t N1,
                                          std::int64_t n0o, std::int64_t n1o,
                                          std::int64_t a0, std::int64_t a1) {
  AdversarialCounts best{0, 0};
  if (N0 <= 0 || N1 <= 0) return best;

  // Work with |(n0o+dn0)*N1 - (n1o+dn1)*N0|, the balance objective scaled
  // by N0*N1, so candidates compare exactly.
  auto scaled_diff = [&](std::int64_t dn0, std::int64_t dn1) {
    return std::llabs((n0o + dn0) * N1 - (n1o + dn1) * N0);
  };

  std::int64_t best_diff = scaled_diff(0, 0);
  for (std::int64_t dn0 = 0; dn0 <= a0; ++dn0) {
    // For this dn0 the unconstrained balancing dn1 solves
    // (n1o+dn1)*N0 = (n0o+dn0)*N1; the objective is V-shaped in dn1, so
    // only the clamped floor/ceil of the real solution matter.
    const std::int64_t num = (n0o + dn0) * N1;
    const std::int64_t floor_n1 = num / N0;          // num >= 0
    const std::int64_t ceil_n1 = (num + N0 - 1) / N0;
    const std::int64_t cands[2] = {
        std::clamp(floor_n1 - n1o, std::int64_t{0}, a1),
        std::clamp(ceil_n1 - n1o, std::int64_t{0}, a1)};
    for (std::int64_t dn1 : cands) {
      const std::int64_t diff = scaled_diff(dn0, dn1);
      if (diff < best_diff) {
        best_diff = diff;
        best = {dn0, dn1};
      }
    }
  }
  return best;
}

SplitPartition make_split_partition(int feature, double eta,
                                    std::span<const int> instances,
                                    const Dataset& data,
                                    const RobustConfig& cfg) {
  const double eps = cfg.epsilon(static_cast<std::size_t>(feature));
  SplitPartition p;
  for (int i : instances) {
    const double v = data.feature(static_cast<std::size_t>(i),
                                  static_cast<std::size_t>(feature));
    if (v < eta - eps)
      p.left_certain.push_back(i);
    else if (!(v < eta + eps))
      p.right_certain.push_back(i);
    else if (v < eta)
      p.ambiguous_left.push_back(i);
    else
      p.ambiguous_right.push_back(i);
  }
  return p;
}

namespace {

struct ClassCounts {
  std::int64_t c0 = 0, c1 = 0;
  void add(double y) { (label01(y) ? c1 : c0)++; }
};

ClassCounts count_labels(std::span<const int> idx, const Dataset& data) {
  ClassCounts c;
  for (int i : idx) c.add(data.label(static_cast<std::size_t>(i)));
  return c;
}

// Worst-case score from the band counts: the balance heuristic's pick,
// floored by the natural assignment (itself a feasible adversarial choice,
// so the result can never exceed the unperturbed score).
double robust_score_from_counts(std::int64_t N0, std::int64_t N1,
                                std::int64_t n0o, std::int64_t n1o,
                                std::int64_t a0, std::int64_t a1,
                                std::int64_t n0_nat, std::int64_t n1_nat,
                                ScoreKind kind) {
  if (N0 == 0 || N1 == 0) return 0.0;
  const AdversarialCounts adv =
      find_adversarial_counts(N0, N1, n0o, n1o, a0, a1);
  const double s_adv =
      split_score({N0, N1, n0o + adv.dn0, n1o + adv.dn1}, kind);
  const double s_nat = split_score({N0, N1, n0_nat, n1_nat}, kind);
  return std::min(s_adv, s_nat);
}

}  // namespace

double robust_score_ig(int feature, double eta, std::span<const int> instances,
                       const Dataset& data, const RobustConfig& cfg,
                       ScoreKind kind) {
  const SplitPartition p =
      make_split_partition(feature, eta, instances, data, cfg);
  const ClassCounts total = count_labels(instances, data);
  const ClassCounts lc = count_labels(p.left_certain, data);
  const ClassCounts al = count_labels(p.ambiguous_left, data);
  const ClassCounts ar = count_labels(p.ambiguous_right, data);
  return robust_score_from_counts(total.c0, total.c1, lc.c0, lc.c1,
                                  al.c0 + ar.c0, al.c1 + ar.c1,
                                  lc.c0 + al.c0, lc.c1 + al.c1, kind);
}

namespace {

struct FeatureBest {
  double score = 0.0;
  double eta = 0.0;
  bool found = false;
};

// Scan all candidate thresholds of one feature. Values get sorted once;
// the ambiguity-window endpoints only move forward as eta grows, so the
// whole scan is one linear pass after the sort.
FeatureBest scan_feature_ig(int feature, std::span<const int> instances,
                            const Dataset& data, const RobustConfig& cfg,
                            ScoreKind kind) {
  const std::size_t m = instances.size();
  std::vector<std::pair<double, int>> items;  // (value, label)
  items.reserve(m);
  for (int i : instances)
    items.emplace_back(data.feature(static_cast<std::size_t>(i),
                                    static_cast<std::size_t>(feature)),
                       label01(data.label(static_cast<std::size_t>(i))));
  std::sort(items.begin(), items.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  // prefix0/1[i] = class counts among the first i sorted values
  std::vector<std::int64_t> prefix0(m + 1, 0), prefix1(m + 1, 0);
  for (std::size_t i = 0; i < m; ++i) {
    prefix0[i + 1] = prefix0[i] + (items[i].second == 0);
    prefix1[i + 1] = prefix1[i] + (items[i].second == 1);
  }
  const std::int64_t N0 = prefix0[m];
  const std::int64_t N1 = prefix1[m];

  const double eps = cfg.epsilon(static_cast<std::size_t>(feature));
  FeatureBest best;
  std::size_t lo = 0;  // first value >= eta - eps
  std::size_t hi = 0;  // first value >= eta + eps
  for (std::size_t k = 1; k < m; ++k) {
    if (!(items[k - 1].first < items[k].first)) continue;
    const double eta = (items[k - 1].first + items[k].first) / 2.0;
    while (lo < m && items[lo].first < eta - eps) ++lo;
    while (hi < m && items[hi].first < eta + eps) ++hi;
    const double score = robust_score_from_counts(
        N0, N1, prefix0[lo], prefix1[lo], prefix0[hi] - prefix0[lo],
        prefix1[hi] - prefix1[lo], prefix0[k], prefix1[k], kind);
    if (!best.found || score > best.score) {
      best = {score, eta, true};
    }
  }
  return best;
}

}  // namespace

std::optional<SplitDecision> best_split_ig(std::span<const int> instances,
                                           const Dataset& data,
                                           const RobustConfig& cfg,
                                           ScoreKind kind, int threads,
                                           std::span<const int> features) {
  if (instances.size() < 2) return std::nullopt;
  const ClassCounts total = count_labels(instances, data);
  if (total.c0 == 0 || total.c1 == 0) return std::nullopt;
  cfg.check_dimension(data.feature_count());

  std::vector<int> feats(features.begin(), features.end());
  if (feats.empty()) {
    feats.resize(data.feature_count());
    for (std::size_t j = 0; j < feats.size(); ++j) feats[j] = static_cast<int>(j);
  } else {
    std::sort(feats.begin(), feats.end());
  }

  std::vector<FeatureBest> results(feats.size());
  parallel_for(feats.size(), threads, [&](std::size_t fi) {
    results[fi] = scan_feature_ig(feats[fi], instances, data, cfg, kind);
  });

  // Serial reduction in ascending feature order; strict > keeps the lowest
  // feature index and lowest threshold on ties.
  int best_feature = -1;
  double best_eta = 0.0;
  double best_score = 0.0;
  for (std::size_t fi = 0; fi < feats.size(); ++fi) {
    if (!results[fi].found) continue;
    if (best_feature < 0 || results[fi].score > best_score) {
      best_feature = feats[fi];
      best_eta = results[fi].eta;
      best_score = results[fi].score;
    }
  }
  if (best_feature < 0 || !(best_score > kMinGain)) return std::nullopt;

  SplitDecision d;
  d.feature = best_feature;
  d.threshold = best_eta;
  d.score = best_score;
  for (int i : instances) {
    if (data.feature(static_cast<std::size_t>(i),
                     static_cast<std::size_t>(best_feature)) < best_eta)
      d.left.push_back(i);
    else
      d.right.push_back(i);
  }
  return d;
}

namespace {

struct IgTreeBuilder {
  const Dataset& data;
  const TreeParams& params;
  std::span<const int> features;
  Tree tree;

  int build(std::vector<int>& rows, int depth) {
    const ClassCounts c = count_labels(rows, data);
    const std::int64_t n = c.c0 + c.c1;
    const double majority = c.c1 > c.c0 ? 1.0 : 0.0;

    std::optional<SplitDecision> split;
    if (depth < params.max_depth && c.c0 > 0 && c.c1 > 0 && n >= 2)
      split = best_split_ig(rows, data, params.epsilon, params.score,
                            params.threads, features);
    if (!split) {
      int id = tree.add_leaf(majority);
      tree.nodes[id].class_prob = {static_cast<double>(c.c0) / n,
                                   static_cast<double>(c.c1) / n};
      return id;
    }
    int id = tree.add_internal(split->feature, split->threshold);
    std::vector<int> left = std::move(split->left);
    std::vector<int> right = std::move(split->right);
    split.reset();  // rows for the children are all we keep
    int l = build(left, depth + 1);
    tree.nodes[id].left = l;
    int r = build(right, depth + 1);
    tree.nodes[id].right = r;
    return id;
  }
};

}  // namespace

Tree train_tree_ig_subset(const Dataset& data, const TreeParams& params,
                          std::span<const int> rows,
                          std::span<const int> features) {
  if (rows.empty())
    throw std::invalid_argument("train_tree_ig: no training rows");
  if (params.max_depth < 1)
    throw std::invalid_argument("train_tree_ig: max_depth must be >= 1");
  params.epsilon.check_dimension(data.feature_count());
  for (int i : rows) {
    const double y = data.label(static_cast<std::size_t>(i));
    if (y != 0.0 && y != 1.0)
      throw std::invalid_argument(
          "train_tree_ig: labels must be 0 or 1 for classification");
  }
  IgTreeBuilder b{data, params, features, {}};
  std::vector<int> all(rows.begin(), rows.end());
  b.build(all, 0);
  return std::move(b.tree);
}

Tree train_tree_ig(const Dataset& data, const TreeParams& params) {
  std::vector<int> rows(data.example_count());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = static_cast<int>(i);
  return train_tree_ig_subset(data, params, rows, {});
}

}  // namespace rtree
