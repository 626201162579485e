#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "rtree/dataset.hpp"
#include "rtree/model.hpp"
#include "rtree/split_ig.hpp"

namespace rtree {

// First and second derivative of the loss wrt the current margin.
struct GradPair {
  double g = 0.0;
  double h = 0.0;
};

// Binary cross-entropy on the margin yhat: g = sigmoid(yhat) - y,
// h = p(1-p). y must be 0 or 1.
GradPair logistic_grad_hess(double y, double yhat);

// Squared error 0.5*(yhat-y)^2: g = yhat - y, h = 1.
GradPair mse_grad_hess(double y, double yhat);

enum class LossKind { logistic, mse };

GradPair loss_grad_hess(LossKind loss, double y, double yhat);

// Gradient/hessian sums of a candidate split's two sides.
struct GHSums {
  double GL = 0.0, HL = 0.0;
  double GR = 0.0, HR = 0.0;
};

// Second-order gain of splitting a node:
//   0.5 * (GL^2/(HL+lambda) + GR^2/(HR+lambda) - G^2/(H+lambda)) - gamma.
double xgb_split_score(const GHSums& s, double lambda, double gamma);

// Optimal additive leaf value -G/(H+lambda).
double leaf_weight(double G, double H, double lambda);

// Worst-case split gain: the minimum of the natural assignment and the
// three band reassignments (all ambiguous right, all left, swapped).
double robust_score_gbdt(int feature, double eta,
                         std::span<const int> instances,
                         std::span<const GradPair> grads, const Dataset& data,
                         const RobustConfig& cfg, double lambda, double gamma);

std::optional<SplitDecision> best_split_gbdt(std::span<const int> instances,
                                             std::span<const GradPair> grads,
                                             const Dataset& data,
                                             const RobustConfig& cfg,
                                             double lambda, double gamma,
                                             int threads = 1);

struct BoostParams {
  int num_trees = 20;
  int max_depth = 5;
  double shrinkage = 0.2;
  double lambda = 1.0;  // L2 penalty on leaf weights
  double gamma = 0.0;   // per-split penalty
  LossKind loss = LossKind::logistic;
  RobustConfig epsilon;
  int threads = 1;
};

// Gradient-boosted trees. Logistic loss starts from margin 0 and yields a
// gbdt-binary model; mse starts from mean(y) and yields gbdt-regression.
// Prediction after k rounds equals base plus the sum of the k tree outputs
// exactly (the trainer updates margins with the same leaf values it stores).
Ensemble train_gbdt(const Dataset& data, const BoostParams& params);

struct ForestParams {
  int num_trees = 10;
  int max_depth = 6;
  ScoreKind score = ScoreKind::info_gain;
  RobustConfig epsilon;
  double row_rate = 0.5;  // per-tree row sample, without replacement
  double col_rate = 0.5;  // per-tree feature sample
  unsigned seed = 0;
  int threads = 1;
};

// Bagged classification trees with feature subsampling and majority-vote
// prediction. One tree at full rates reproduces train_tree_ig exactly.
Ensemble train_random_forest(const Dataset& data, const ForestParams& params);

}  // namespace rtree
