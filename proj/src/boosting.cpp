#include "rtree/boosting.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include <json.hpp>

#include "rtree/parallel.hpp"

namespace rtree {

GradPair logistic_grad_hess(double y, double yhat) {
  // Stable sigmoid: never exponentiates a positive argument.
  double p;
  if (yhat >= 0.0) {
    p = 1.0 / (1.0 + std::exp(-yhat));
  } else {
    const double e = std::exp(yhat);
    p = e / (1.0 + e);
  }
  return {p - y, p * (1.0 - p)};
}

GradPair mse_grad_hess(double y, double yhat) { return {yhat - y, 1.0}; }

GradPair loss_grad_hess(LossKind loss, double y, double yhat) {
  return loss == LossKind::logistic ? logistic_grad_hess(y, yhat)
                                    : mse_grad_hess(y, yhat);
}

double xgb_split_score(const GHSums& s, double lambda, double gamma) {
  const double G = s.GL + s.GR;
  const double H = s.HL + s.HR;
  return 0.5 * (s.GL * s.GL / (s.HL + lambda) + s.GR * s.GR / (s.HR + lambda) -
                G * G / (H + lambda)) -
         gamma;
}

double leaf_weight(double G, double H, double lambda) {
  return -G / (H + lambda);
}

namespace {

struct GHPrefix {
  std::vector<double> g, h;  // g[i], h[i] = sums over first i sorted items
};

// min over the four band assignments: natural split, band all right,
// band all left, band swapped across the threshold.
double four_case_min(double g_lo, double h_lo,    // certain-left sums
                     double g_nat, double h_nat,  // natural-left sums
                     double g_hi, double h_hi,    // certain-left + band sums
                     double G, double H, double lambda, double gamma) {
  const auto score = [&](double gl, double hl) {
    return xgb_split_score({gl, hl, G - gl, H - hl}, lambda, gamma);
  };
  const double s1 = score(g_nat, h_nat);
  const double s2 = score(g_lo, h_lo);
  const double s3 = score(g_hi, h_hi);
  // swapped: keep the band's natural-right part on the left and vice versa
  const double s4 = score(g_lo + (g_hi - g_nat), h_lo + (h_hi - h_nat));
  return std::min(std::min(s1, s2), std::min(s3, s4));
}

struct FeatureBestG {
  double score = 0.0;
  double eta = 0.0;
  bool found = false;
};

FeatureBestG scan_feature_gbdt(int feature, std::span<const int> instances,
                               std::span<const GradPair> grads,
                               const Dataset& data, const RobustConfig& cfg,
                               double lambda, double gamma) {
  const std::size_t m = instances.size();
  struct Item {
    double v, g, h;
  };
  std::vector<Item> items;
  items.reserve(m);
  for (int i : instances) {
    const auto idx = static_cast<std::size_t>(i);
    items.push_back({data.feature(idx, static_cast<std::size_t>(feature)),
                     grads[idx].g, grads[idx].h});
  }
  std::sort(items.begin(), items.end(),
            [](const Item& a, const Item& b) { return a.v < b.v; });

  GHPrefix p;
  p.g.assign(m + 1, 0.0);
  p.h.assign(m + 1, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    p.g[i + 1] = p.g[i] + items[i].g;
    p.h[i + 1] = p.h[i] + items[i].h;
  }
  const double G = p.g[m];
  const double H = p.h[m];

  const double eps = cfg.epsilon(static_cast<std::size_t>(feature));
  FeatureBestG best;
  std::size_t lo = 0;  // first value >= eta - eps
  std::size_t hi = 0;  // first value >= eta + eps
  for (std::size_t k = 1; k < m; ++k) {
    if (!(items[k - 1].v < items[k].v)) continue;
    const double eta = (items[k - 1].v + items[k].v) / 2.0;
    while (lo < m && items[lo].v < eta - eps) ++lo;
    while (hi < m && items[hi].v < eta + eps) ++hi;
    const double score = four_case_min(p.g[lo], p.h[lo], p.g[k], p.h[k],
                                       p.g[hi], p.h[hi], G, H, lambda, gamma);
    if (!best.found || score > best.score) best = {score, eta, true};
  }
  return best;
}

}  // namespace

double robust_score_gbdt(int feature, double eta,
                         std::span<const int> instances,
                         std::span<const GradPair> grads, const Dataset& data,
                         const RobustConfig& cfg, double lambda, double gamma) {
  const SplitPartition part =
      make_split_partition(feature, eta, instances, data, cfg);
  double G = 0.0, H = 0.0;
  const auto sum_of = [&](const std::vector<int>& idx, double& g, double& h) {
    for (int i : idx) {
      g += grads[static_cast<std::size_t>(i)].g;
      h += grads[static_cast<std::size_t>(i)].h;
    }
  };
  double g_lo = 0.0, h_lo = 0.0;
  sum_of(part.left_certain, g_lo, h_lo);
  double g_al = 0.0, h_al = 0.0;
  sum_of(part.ambiguous_left, g_al, h_al);
  double g_ar = 0.0, h_ar = 0.0;
  sum_of(part.ambiguous_right, g_ar, h_ar);
  double g_rc = 0.0, h_rc = 0.0;
  sum_of(part.right_certain, g_rc, h_rc);
  G = g_lo + g_al + g_ar + g_rc;
  H = h_lo + h_al + h_ar + h_rc;
  return four_case_min(g_lo, h_lo, g_lo + g_al, h_lo + h_al,
                       g_lo + g_al + g_ar, h_lo + h_al + h_ar, G, H, lambda,
                       gamma);
}

std::optional<SplitDecision> best_split_gbdt(std::span<const int> instances,
                                             std::span<const GradPair> grads,
                                             const Dataset& data,
                                             const RobustConfig& cfg,
                                             double lambda, double gamma,
                                             int threads) {
  if (instances.size() < 2) return std::nullopt;
  cfg.check_dimension(data.feature_count());

  const std::size_t d = data.feature_count();
  std::vector<FeatureBestG> results(d);
  parallel_for(d, threads, [&](std::size_t j) {
    results[j] = scan_feature_gbdt(static_cast<int>(j), instances, grads, data,
                                   cfg, lambda, gamma);
  });

  int best_feature = -1;
  double best_eta = 0.0, best_score = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    if (!results[j].found) continue;
    if (best_feature < 0 || results[j].score > best_score) {
      best_feature = static_cast<int>(j);
      best_eta = results[j].eta;
      best_score = results[j].score;
    }
  }
  if (best_feature < 0 || !(best_score > kMinGain)) return std::nullopt;

  SplitDecision dec;
  dec.feature = best_feature;
  dec.threshold = best_eta;
  dec.score = best_score;
  for (int i : instances) {
    if (data.feature(static_cast<std::size_t>(i),
                     static_cast<std::size_t>(best_feature)) < best_eta)
      dec.left.push_back(i);
    else
      dec.right.push_back(i);
  }
  return dec;
}

namespace {

struct GbdtTreeBuilder {
  const Dataset& data;
  const BoostParams& params;
  std::span<const GradPair> grads;
  std::vector<double>& margins;  // updated as leaves are installed
  Tree tree;

  int build(std::vector<int>& rows, int depth) {
    std::optional<SplitDecision> split;
    if (depth < params.max_depth && rows.size() >= 2)
      split = best_split_gbdt(rows, grads, data, params.epsilon, params.lambda,
                              params.gamma, params.threads);
    if (!split) {
      double G = 0.0, H = 0.0;
      for (int i : rows) {
        G += grads[static_cast<std::size_t>(i)].g;
        H += grads[static_cast<std::size_t>(i)].h;
      }
      const double w = leaf_weight(G, H, params.lambda) * params.shrinkage;
      const int id = tree.add_leaf(w);
      // Update margins here with the stored value itself, so the running
      // prediction matches base + sum of tree outputs bit for bit.
      for (int i : rows) margins[static_cast<std::size_t>(i)] += w;
      return id;
    }
    const int id = tree.add_internal(split->feature, split->threshold);
    std::vector<int> left = std::move(split->left);
    std::vector<int> right = std::move(split->right);
    split.reset();
    const int l = build(left, depth + 1);
    tree.nodes[id].left = l;
    const int r = build(right, depth + 1);
    tree.nodes[id].right = r;
    return id;
  }
};

}  // namespace

Ensemble train_gbdt(const Dataset& data, const BoostParams& params) {
  const std::size_t n = data.example_count();
  if (n == 0) throw std::invalid_argument("train_gbdt: empty dataset");
  if (params.num_trees < 1 || params.max_depth < 1)
    throw std::invalid_argument("train_gbdt: num_trees and max_depth must be >= 1");
  params.epsilon.check_dimension(data.feature_count());

  double base = 0.0;
  if (params.loss == LossKind::logistic) {
    for (std::size_t i = 0; i < n; ++i) {
      const double y = data.label(i);
      if (y != 0.0 && y != 1.0)
        throw std::invalid_argument(
            "train_gbdt: logistic loss needs labels in {0,1}");
    }
  } else {
    for (std::size_t i = 0; i < n; ++i)
      if (!std::isfinite(data.label(i)))
        throw std::invalid_argument("train_gbdt: non-finite label");
    base = std::accumulate(data.labels().begin(), data.labels().end(), 0.0) /
           static_cast<double>(n);
  }

  Ensemble model;
  model.kind = params.loss == LossKind::logistic ? EnsembleKind::gbdt_binary
                                                 : EnsembleKind::gbdt_regression;
  model.base_score = base;
  model.epsilon_used = params.epsilon;

  std::vector<double> margins(n, base);
  std::vector<GradPair> grads(n);
  std::vector<int> all(n);
  for (std::size_t i = 0; i < n; ++i) all[i] = static_cast<int>(i);

  for (int round = 0; round < params.num_trees; ++round) {
    for (std::size_t i = 0; i < n; ++i)
      grads[i] = loss_grad_hess(params.loss, data.label(i), margins[i]);
    GbdtTreeBuilder b{data, params, grads, margins, {}};
    std::vector<int> rows = all;
    b.build(rows, 0);
    model.trees.push_back(std::move(b.tree));
  }
  return model;
}

Ensemble train_random_forest(const Dataset& data, const ForestParams& params) {
  const std::size_t n = data.example_count();
  const std::size_t d = data.feature_count();
  if (n == 0) throw std::invalid_argument("train_random_forest: empty dataset");
  if (params.num_trees < 1)
    throw std::invalid_argument("train_random_forest: num_trees must be >= 1");
  if (!(params.row_rate > 0.0 && params.row_rate <= 1.0) ||
      !(params.col_rate > 0.0 && params.col_rate <= 1.0))
    throw std::invalid_argument("train_random_forest: rates must be in (0,1]");
  params.epsilon.check_dimension(d);

  std::mt19937 rng(params.seed);
  TreeParams tp;
  tp.max_depth = params.max_depth;
  tp.score = params.score;
  tp.epsilon = params.epsilon;
  tp.threads = params.threads;

  Ensemble model;
  model.kind = EnsembleKind::random_forest;
  model.epsilon_used = params.epsilon;

  std::vector<int> all_rows(n), all_cols(d);
  for (std::size_t i = 0; i < n; ++i) all_rows[i] = static_cast<int>(i);
  for (std::size_t j = 0; j < d; ++j) all_cols[j] = static_cast<int>(j);

  const auto take = [](std::vector<int> pool, double rate, std::mt19937& r) {
    const auto want = std::max<std::size_t>(
        1, static_cast<std::size_t>(
               std::llround(rate * static_cast<double>(pool.size()))));
    std::shuffle(pool.begin(), pool.end(), r);
    pool.resize(std::min(want, pool.size()));
    std::sort(pool.begin(), pool.end());
    return pool;
  };

  for (int k = 0; k < params.num_trees; ++k) {
    // All randomness drawn on this thread, in tree order: a fixed seed
    // fixes the forest no matter how many worker threads scans use.
    std::vector<int> rows = take(all_rows, params.row_rate, rng);
    std::vector<int> cols = take(all_cols, params.col_rate, rng);
    model.trees.push_back(train_tree_ig_subset(data, tp, rows, cols));
  }
  return model;
}

}  // namespace rtree
