#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "rtree/dataset.hpp"
#include "rtree/model.hpp"

namespace rtree {

// Class counts describing one split of a binary-labeled node:
// N0/N1 examples of class 0/1 at the node, of which n0/n1 go left.
struct CountState {
  std::int64_t N0 = 0;
  std::int64_t N1 = 0;
  std::int64_t n0 = 0;
  std::int64_t n1 = 0;
};

// Information gain of the split in bits: H(label) - H(label | side).
// Empty sides contribute zero conditional entropy.
double info_gain(const CountState& c);

// Gini impurity drop: parent impurity minus size-weighted child impurity.
double gini_gain(const CountState& c);

enum class ScoreKind { info_gain, gini };

double split_score(const CountState& c, ScoreKind kind);

// Whether moving one example of `label` from right to left strictly
// decreases the score (both gains share this monotonicity condition):
// the left side must be short on that label both before and after the move.
bool adversary_prefers_left(const CountState& c, int label);

// How many ambiguous examples of each class the adversary sends left.
struct AdversarialCounts {
  std::int64_t dn0 = 0;
  std::int64_t dn1 = 0;
};

// Picks (dn0, dn1) with 0 <= dn0 <= a0, 0 <= dn1 <= a1 minimizing the
// class-ratio imbalance |(n0o+dn0)/N0 - (n1o+dn1)/N1|, a cheap surrogate
// for minimizing the split score itself. n0o/n1o are the counts already
// certain to be left; exact for the surrogate objective (ties keep the
// first minimizer in scan order: dn0 ascending, floor before ceil).
AdversarialCounts find_adversarial_counts(std::int64_t N0, std::int64_t N1,
                                          std::int64_t n0o, std::int64_t n1o,
                                          std::int64_t a0, std::int64_t a1);

// Instances split by threshold eta on one feature under perturbation
// radius eps. A point can reach the left branch iff x-eps < eta and the
// right branch iff x+eps >= eta, so certainly-left is x < eta-eps,
// certainly-right is x >= eta+eps, and the ambiguous band is the
// half-open [eta-eps, eta+eps), itself divided by natural side
// (ambiguous_left: x < eta, ambiguous_right: x >= eta). With eps = 0 the
// band is empty and the partition degenerates to the natural split.
struct SplitPartition {
  std::vector<int> left_certain;
  std::vector<int> right_certain;
  std::vector<int> ambiguous_left;
  std::vector<int> ambiguous_right;
};

SplitPartition make_split_partition(int feature, double eta,
                                    std::span<const int> instances,
                                    const Dataset& data,
                                    const RobustConfig& cfg);

// Worst-case split score: the adversary assigns the ambiguous band to
// whichever sides hurt most. Uses the ratio-balancing heuristic above and
// never exceeds the natural (unperturbed) score.
double robust_score_ig(int feature, double eta, std::span<const int> instances,
                       const Dataset& data, const RobustConfig& cfg,
                       ScoreKind kind);

// A chosen split: feature, threshold, its score, and the natural
// (unperturbed) assignment of the node's instances to the children.
struct SplitDecision {
  int feature = -1;
  double threshold = 0.0;
  double score = 0.0;
  std::vector<int> left;
  std::vector<int> right;
};

// Scores below this are treated as zero when deciding whether a split is
// worth taking, absorbing float noise in gains that are analytically 0.
inline constexpr double kMinGain = 1e-12;

// Best split over candidate thresholds (midpoints between consecutive
// distinct values) on the allowed features. Robust scoring when the config
// has a positive radius, plain scoring otherwise. Ties break toward the
// lower feature index, then the lower threshold. Returns nothing when no
// candidate scores above zero. `features` empty means all features.
std::optional<SplitDecision> best_split_ig(std::span<const int> instances,
                                           const Dataset& data,
                                           const RobustConfig& cfg,
                                           ScoreKind kind, int threads = 1,
                                           std::span<const int> features = {});

struct TreeParams {
  int max_depth = 4;
  ScoreKind score = ScoreKind::info_gain;
  RobustConfig epsilon;  // radius 0 trains a plain greedy tree
  int threads = 1;
};

// Grows a classification tree top-down: recurse until the node is pure,
// the depth limit is hit, or no split has positive score. Leaves predict
// the majority class (ties resolve to 0).
Tree train_tree_ig(const Dataset& data, const TreeParams& params);

// Same, restricted to a subset of rows / features (used by the forest).
Tree train_tree_ig_subset(const Dataset& data, const TreeParams& params,
                          std::span<const int> rows,
                          std::span<const int> features);

}  // namespace rtree
