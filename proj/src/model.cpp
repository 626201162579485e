#include "rtree/model.hpp"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace rtree {

using nlohmann::json;

int Tree::add_leaf(double value) {
  TreeNode n;
  n.leaf_value = value;
  nodes.push_back(n);
  return static_cast<int>(nodes.size()) - 1;
}

int Tree::add_internal(int feature, double threshold) {
  TreeNode n;
  n.feature = feature;
  n.threshold = threshold;
  nodes.push_back(n);
  return static_cast<int>(nodes.size()) - 1;
}

int Tree::leaf_index(std::span<const double> x) const {
  int id = 0;
  while (!nodes[id].is_leaf()) {
    const TreeNode& n = nodes[id];
    id = x[n.feature] < n.threshold ? n.left : n.right;
  }
  return id;
}

double predict_tree(const Tree& t, std::span<const double> x) {
  return t.predict(x);
}

std::string kind_name(EnsembleKind k) {
  switch (k) {
    case EnsembleKind::single_tree: return "single-tree";
    case EnsembleKind::random_forest: return "random-forest";
    case EnsembleKind::gbdt_binary: return "gbdt-binary";
    case EnsembleKind::gbdt_regression: return "gbdt-regression";
  }
  throw std::logic_error("unknown ensemble kind");
}

EnsembleKind kind_from_name(const std::string& name) {
  if (name == "single-tree") return EnsembleKind::single_tree;
  if (name == "random-forest") return EnsembleKind::random_forest;
  if (name == "gbdt-binary") return EnsembleKind::gbdt_binary;
  if (name == "gbdt-regression") return EnsembleKind::gbdt_regression;
  throw std::runtime_error("unknown model kind '" + name + "'");
}

double Ensemble::raw_score(std::span<const double> x) const {
  double s = base_score;
  for (const Tree& t : trees) s += t.predict(x);
  return s;
}

int Ensemble::predict_label(std::span<const double> x) const {
  switch (kind) {
    case EnsembleKind::gbdt_binary:
      return raw_score(x) > 0.0 ? 1 : 0;
    case EnsembleKind::single_tree:
      if (trees.empty()) return 0;
      return trees[0].predict(x) >= 0.5 ? 1 : 0;
    case EnsembleKind::random_forest: {
      int votes1 = 0;
      for (const Tree& t : trees)
        if (t.predict(x) >= 0.5) ++votes1;
      int votes0 = static_cast<int>(trees.size()) - votes1;
      return votes1 > votes0 ? 1 : 0;
    }
    case EnsembleKind::gbdt_regression:
      throw std::logic_error("predict_label on a regression model");
  }
  throw std::logic_error("unknown ensemble kind");
}

double predict_ensemble(const Ensemble& e, std::span<const double> x) {
  return e.raw_score(x);
}

namespace {

json tree_to_json(const Tree& t) {
  json nodes = json::array();
  for (const TreeNode& n : t.nodes) {
    if (n.is_leaf()) {
      nodes.push_back({{"leaf", n.leaf_value}});
    } else {
      nodes.push_back({{"feature", n.feature},
                       {"threshold", n.threshold},
                       {"left", n.left},
                       {"right", n.right}});
    }
  }
  return json{{"nodes", nodes}};
}

Tree tree_from_json(const json& jt) {
  if (!jt.is_object() || !jt.contains("nodes") || !jt["nodes"].is_array())
    throw std::runtime_error("model json: tree needs a 'nodes' array");
  const json& jn = jt["nodes"];
  Tree t;
  const int count = static_cast<int>(jn.size());
  if (count == 0) throw std::runtime_error("model json: tree has no nodes");
  for (const json& n : jn) {
    if (!n.is_object())
      throw std::runtime_error("model json: node must be an object");
    TreeNode node;
    if (n.contains("leaf")) {
      if (!n["leaf"].is_number())
        throw std::runtime_error("model json: leaf value must be a number");
      node.leaf_value = n["leaf"].get<double>();
    } else {
      for (const char* key : {"feature", "threshold", "left", "right"})
        if (!n.contains(key))
          throw std::runtime_error(std::string("model json: internal node missing '") +
                                   key + "'");
      node.feature = n["feature"].get<int>();
      node.threshold = n["threshold"].get<double>();
      node.left = n["left"].get<int>();
      node.right = n["right"].get<int>();
      if (node.feature < 0)
        throw std::runtime_error("model json: negative feature index");
      if (node.left < 0 || node.left >= count || node.right < 0 ||
          node.right >= count)
        throw std::runtime_error("model json: child index out of range");
    }
    t.nodes.push_back(node);
  }

  // The nodes must form a proper tree rooted at 0: every node except the
  // root referenced exactly once.
  std::vector<int> ref_count(t.nodes.size(), 0);
  for (const TreeNode& n : t.nodes) {
    if (n.is_leaf()) continue;
    ++ref_count[n.left];
    ++ref_count[n.right];
  }
  if (ref_count[0] != 0)
    throw std::runtime_error("model json: root node is referenced as a child");
  for (std::size_t i = 1; i < ref_count.size(); ++i)
    if (ref_count[i] != 1)
      throw std::runtime_error("model json: node " + std::to_string(i) +
                               " referenced " + std::to_string(ref_count[i]) +
                               " times (expected once)");
  return t;
}

}  // namespace

std::string serialize(const Ensemble& e) {
  json j;
  j["kind"] = kind_name(e.kind);
  j["base_score"] = e.base_score;
  if (e.epsilon_used.is_scalar())
    j["epsilon_used"] = e.epsilon_used.scalar_value();
  else
    j["epsilon_used"] = e.epsilon_used.per_feature_values();
  j["trees"] = json::array();
  for (const Tree& t : e.trees) j["trees"].push_back(tree_to_json(t));
  if (!e.meta_json.empty()) {
    json meta = json::parse(e.meta_json, nullptr, false);
    if (meta.is_discarded())
      throw std::runtime_error("ensemble meta is not valid json");
    j["meta"] = meta;
  }
  return j.dump(2);
}

Ensemble deserialize(const std::string& json_text) {
  json j = json::parse(json_text, nullptr, false);
  if (j.is_discarded())
    throw std::runtime_error("model json: parse error");
  if (!j.is_object() || !j.contains("kind") || !j.contains("trees"))
    throw std::runtime_error("model json: need 'kind' and 'trees'");

  Ensemble e;
  e.kind = kind_from_name(j["kind"].get<std::string>());
  e.base_score = j.value("base_score", 0.0);
  if (j.contains("epsilon_used")) {
    const json& je = j["epsilon_used"];
    if (je.is_number())
      e.epsilon_used = RobustConfig(je.get<double>());
    else if (je.is_array())
      e.epsilon_used = RobustConfig(je.get<std::vector<double>>());
    else
      throw std::runtime_error("model json: epsilon_used must be number or array");
  }
  if (!j["trees"].is_array())
    throw std::runtime_error("model json: 'trees' must be an array");
  for (const json& jt : j["trees"]) e.trees.push_back(tree_from_json(jt));
  if (j.contains("meta")) e.meta_json = j["meta"].dump();
  return e;
}

void save_model(const Ensemble& e, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << serialize(e) << "\n";
}

Ensemble load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  try {
    return deserialize(text);
  } catch (const std::exception& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

}  // namespace rtree
