#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rtree/dataset.hpp"

namespace rtree {

// One node of a binary decision tree. Internal nodes test
// x[feature] < threshold (go left) / x[feature] >= threshold (go right);
// values exactly on the threshold route right. Leaves carry a real value:
// a class label for plain trees and forests, an additive weight for
// boosted trees.
struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double leaf_value = 0.0;
  // Training-time class frequencies at classification leaves (p0, p1).
  // Informational only; not serialized.
  std::optional<std::array<double, 2>> class_prob;

  bool is_leaf() const { return feature < 0; }
};

struct Tree {
  std::vector<TreeNode> nodes;  // node 0 is the root

  bool empty() const { return nodes.empty(); }

  int add_leaf(double value);
  int add_internal(int feature, double threshold);

  // Index of the leaf x falls into.
  int leaf_index(std::span<const double> x) const;
  double predict(std::span<const double> x) const {
    return nodes[leaf_index(x)].leaf_value;
  }
};

double predict_tree(const Tree& t, std::span<const double> x);

enum class EnsembleKind { single_tree, random_forest, gbdt_binary, gbdt_regression };

std::string kind_name(EnsembleKind k);
EnsembleKind kind_from_name(const std::string& name);

// A trained model: one tree, a bag of voting trees, or an additive boosted
// ensemble, together with the perturbation radius it was trained under.
struct Ensemble {
  EnsembleKind kind = EnsembleKind::single_tree;
  double base_score = 0.0;
  std::vector<Tree> trees;
  RobustConfig epsilon_used;
  std::string meta_json;  // training parameters, free-form JSON object text

  // base_score plus the sum of tree outputs. The margin for boosted
  // classifiers; for forests this is just the vote-value sum.
  double raw_score(std::span<const double> x) const;

  // Classification label in {0,1}. Boosted binary models threshold the
  // margin at 0, forests take a majority vote, single trees read the leaf
  // label. Ties (vote ties, zero margin) resolve to 0.
  // Throws for regression models.
  int predict_label(std::span<const double> x) const;

  bool is_classifier() const { return kind != EnsembleKind::gbdt_regression; }
};

double predict_ensemble(const Ensemble& e, std::span<const double> x);

// JSON round-trip. Numbers survive serialize -> deserialize exactly.
std::string serialize(const Ensemble& e);
Ensemble deserialize(const std::string& json_text);

void save_model(const Ensemble& e, const std::string& path);
Ensemble load_model(const std::string& path);

}  // namespace rtree
