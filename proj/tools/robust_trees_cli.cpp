// Command-line front end: train models, attack them, dump decision maps,
// and sweep configurations. All file formats are documented in README.md.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rtree/attacks.hpp"
#include "rtree/boosting.hpp"
#include "rtree/dataset.hpp"
#include "rtree/model.hpp"
#include "rtree/split_ig.hpp"

namespace {

using namespace rtree;

std::string scaler_path_for(const std::string& model_path) {
  return model_path + ".scaler.json";
}

double classification_accuracy(const Ensemble& model, const Dataset& data) {
  if (data.example_count() == 0) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.example_count(); ++i) {
    const int y = data.label(i) >= 0.5 ? 1 : 0;
    if (model.predict_label(data.row(i)) == y) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.example_count());
}

double rmse(const Ensemble& model, const Dataset& data) {
  if (data.example_count() == 0) return 0.0;
  double sq = 0.0;
  for (std::size_t i = 0; i < data.example_count(); ++i) {
    const double d = model.raw_score(data.row(i)) - data.label(i);
    sq += d * d;
  }
  return std::sqrt(sq / static_cast<double>(data.example_count()));
}

struct TrainFlags {
  std::string train_path;
  std::string test_path;
  std::string model_path;
  std::string kind = "tree";
  std::string score = "info-gain";
  std::string loss = "logistic";
  std::string epsilon = "0";
  int depth = 5;
  int num_trees = 20;
  double shrinkage = 0.2;
  double lambda = 1.0;
  double gamma = 0.0;
  double row_rate = 0.5;
  double col_rate = 0.5;
  unsigned seed = 0;
  int threads = 1;
};

void add_model_flags(CLI::App* cmd, TrainFlags& f) {
  cmd->add_option("--kind", f.kind, "model family")
      ->check(CLI::IsMember({"tree", "gbdt", "forest"}));
  cmd->add_option("--score", f.score, "split score for tree/forest")
      ->check(CLI::IsMember({"info-gain", "gini"}));
  cmd->add_option("--loss", f.loss, "gbdt loss")
      ->check(CLI::IsMember({"logistic", "mse"}));
  cmd->add_option("--epsilon", f.epsilon,
                  "perturbation radius in normalized units; scalar or one "
                  "comma-separated value per feature");
  cmd->add_option("--depth", f.depth, "maximum tree depth")
      ->check(CLI::Range(1, 64));
  cmd->add_option("--num-trees", f.num_trees, "rounds / forest size")
      ->check(CLI::Range(1, 100000));
  cmd->add_option("--shrinkage", f.shrinkage, "gbdt learning rate")
      ->check(CLI::Range(1e-6, 1.0));
  cmd->add_option("--lambda", f.lambda, "gbdt leaf L2 penalty")
      ->check(CLI::Range(0.0, 1e9));
  cmd->add_option("--gamma", f.gamma, "gbdt per-split penalty")
      ->check(CLI::Range(0.0, 1e9));
  cmd->add_option("--row-rate", f.row_rate, "forest row sampling rate")
      ->check(CLI::Range(1e-9, 1.0));
  cmd->add_option("--col-rate", f.col_rate, "forest feature sampling rate")
      ->check(CLI::Range(1e-9, 1.0));
  cmd->add_option("--seed", f.seed, "rng seed");
  cmd->add_option("--threads", f.threads, "worker threads")
      ->check(CLI::Range(1, 256));
}

nlohmann::json meta_for(const TrainFlags& f) {
  nlohmann::json meta;
  meta["kind"] = f.kind;
  meta["epsilon"] = f.epsilon;
  meta["depth"] = f.depth;
  meta["seed"] = f.seed;
  if (f.kind == "tree" || f.kind == "forest") meta["score"] = f.score;
  if (f.kind == "gbdt") {
    meta["loss"] = f.loss;
    meta["num_trees"] = f.num_trees;
    meta["shrinkage"] = f.shrinkage;
    meta["lambda"] = f.lambda;
    meta["gamma"] = f.gamma;
  }
  if (f.kind == "forest") {
    meta["num_trees"] = f.num_trees;
    meta["row_rate"] = f.row_rate;
    meta["col_rate"] = f.col_rate;
  }
  return meta;
}

Ensemble train_from_flags(const TrainFlags& f, const Dataset& train_scaled) {
  const RobustConfig cfg = RobustConfig::parse(f.epsilon);
  cfg.check_dimension(train_scaled.feature_count());
  const ScoreKind score =
      f.score == "gini" ? ScoreKind::gini : ScoreKind::info_gain;

  Ensemble model;
  if (f.kind == "tree") {
    TreeParams tp;
    tp.max_depth = f.depth;
    tp.score = score;
    tp.epsilon = cfg;
    tp.threads = f.threads;
    model.kind = EnsembleKind::single_tree;
    model.trees.push_back(train_tree_ig(train_scaled, tp));
    model.epsilon_used = cfg;
  } else if (f.kind == "gbdt") {
    BoostParams bp;
    bp.num_trees = f.num_trees;
    bp.max_depth = f.depth;
    bp.shrinkage = f.shrinkage;
    bp.lambda = f.lambda;
    bp.gamma = f.gamma;
    bp.loss = f.loss == "mse" ? LossKind::mse : LossKind::logistic;
    bp.epsilon = cfg;
    bp.threads = f.threads;
    model = train_gbdt(train_scaled, bp);
  } else {
    ForestParams fp;
    fp.num_trees = f.num_trees;
    fp.max_depth = f.depth;
    fp.score = score;
    fp.epsilon = cfg;
    fp.row_rate = f.row_rate;
    fp.col_rate = f.col_rate;
    fp.seed = f.seed;
    fp.threads = f.threads;
    model = train_random_forest(train_scaled, fp);
  }
  model.meta_json = meta_for(f).dump();
  return model;
}

void print_metric(const char* name, double value) {
  std::printf("%s=%.6f\n", name, value);
}

int cmd_train(const TrainFlags& f) {
  const Dataset raw_train = load_libsvm(f.train_path);
  const Scaler scaler = fit_scaler(raw_train);
  const Dataset train_scaled = apply_scaler(scaler, raw_train);

  const Ensemble model = train_from_flags(f, train_scaled);
  save_model(model, f.model_path);
  save_scaler(scaler, scaler_path_for(f.model_path));

  const bool regression = model.kind == EnsembleKind::gbdt_regression;
  if (regression)
    print_metric("train_rmse", rmse(model, train_scaled));
  else
    print_metric("train_accuracy", classification_accuracy(model, train_scaled));
  if (!f.test_path.empty()) {
    const Dataset test_scaled = apply_scaler(scaler, load_libsvm(f.test_path));
    if (regression)
      print_metric("test_rmse", rmse(model, test_scaled));
    else
      print_metric("test_accuracy", classification_accuracy(model, test_scaled));
  }
  return 0;
}

struct EvalFlags {
  std::string model_path;
  std::string test_path;
  std::string train_path;  // optional, seeds boundary-attack directions
  std::string attack = "boundary";
  std::string out_path;
  std::int64_t budget = 20000;
  unsigned seed = 0;
  int threads = 1;
  int max_eval = 0;  // 0 = attack every test example
};

// with_common=false skips --seed/--threads for subcommands that already
// registered them through add_model_flags
void add_eval_flags(CLI::App* cmd, EvalFlags& f, bool with_common = true) {
  cmd->add_option("--attack", f.attack, "attack family")
      ->check(CLI::IsMember({"papernot", "boundary", "exact"}));
  cmd->add_option("--budget", f.budget, "query budget per example")
      ->check(CLI::Range(std::int64_t{1}, std::int64_t{100000000}));
  if (with_common) {
    cmd->add_option("--seed", f.seed, "rng seed");
    cmd->add_option("--threads", f.threads, "worker threads")
        ->check(CLI::Range(1, 256));
  }
  cmd->add_option("--max-eval", f.max_eval,
                  "attack at most this many examples (0 = all)")
      ->check(CLI::Range(0, 1000000000));
}

Dataset head(const Dataset& d, std::size_t count) {
  count = std::min(count, d.example_count());
  std::vector<double> features(count * d.feature_count());
  std::vector<double> labels(count);
  for (std::size_t i = 0; i < count; ++i) {
    labels[i] = d.label(i);
    for (std::size_t j = 0; j < d.feature_count(); ++j)
      features[i * d.feature_count() + j] = d.feature(i, j);
  }
  return Dataset(std::move(features), std::move(labels), d.feature_count());
}

int cmd_eval(const EvalFlags& f) {
  const Ensemble model = load_model(f.model_path);
  const Scaler scaler = load_scaler(scaler_path_for(f.model_path));
  Dataset test = apply_scaler(scaler, load_libsvm(f.test_path));
  if (f.max_eval > 0) test = head(test, static_cast<std::size_t>(f.max_eval));

  std::optional<Dataset> train;
  if (!f.train_path.empty())
    train = apply_scaler(scaler, load_libsvm(f.train_path));

  EvalOptions opt;
  opt.attack = attack_from_name(f.attack);
  opt.budget = f.budget;
  opt.seed = f.seed;
  opt.threads = f.threads;
  opt.train = train ? &*train : nullptr;

  const EvalReport report = evaluate_robustness(model, test, opt);
  if (!f.out_path.empty()) write_eval_csv(report, opt.attack, f.out_path);

  print_metric("accuracy", report.accuracy);
  print_metric("success_rate", report.success_rate);
  print_metric("avg_linf", report.avg_linf);
  print_metric("avg_l1", report.avg_l1);
  print_metric("avg_l2", report.avg_l2);
  std::printf("attacked=%zu\nsuccesses=%zu\n", report.attacked,
              report.successes);
  return 0;
}

int cmd_boundary(const std::string& model_path, const std::string& out_path,
                 int grid) {
  const Ensemble model = load_model(model_path);
  // the scaler next to the model records the training dimension; a tree
  // may ignore a feature, so inspecting splits alone is not enough
  const Scaler scaler = load_scaler(scaler_path_for(model_path));
  if (scaler.min.size() != 2)
    throw std::invalid_argument(
        "decision-map export needs a model over exactly 2 features");

  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("cannot write " + out_path);
  out << "x1,x2,label\n";
  std::vector<double> p(2);
  for (int i = 0; i < grid; ++i) {
    p[0] = (i + 0.5) / grid;
    for (int j = 0; j < grid; ++j) {
      p[1] = (j + 0.5) / grid;
      out << p[0] << ',' << p[1] << ',' << model.predict_label(p) << '\n';
    }
  }
  return 0;
}

std::vector<int> parse_int_list(const std::string& text, const char* what) {
  std::vector<int> vals;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = text.find(',', start);
    const std::string tok = text.substr(
        start, comma == std::string::npos ? std::string::npos : comma - start);
    try {
      vals.push_back(std::stoi(tok));
    } catch (const std::exception&) {
      throw std::runtime_error(std::string("bad ") + what + " value '" + tok +
                               "'");
    }
    if (vals.back() < 1)
      throw std::runtime_error(std::string(what) + " values must be >= 1");
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (vals.empty()) throw std::runtime_error(std::string(what) + " list is empty");
  return vals;
}

int cmd_sweep(const TrainFlags& tf, const EvalFlags& ef,
              const std::string& trees_list, const std::string& depth_list,
              const std::string& out_path) {
  const std::vector<int> tree_counts = parse_int_list(trees_list, "--num-trees-list");
  const std::vector<int> depths = parse_int_list(depth_list, "--depth-list");
  const int max_trees = *std::max_element(tree_counts.begin(), tree_counts.end());

  const Dataset raw_train = load_libsvm(tf.train_path);
  const Scaler scaler = fit_scaler(raw_train);
  const Dataset train_scaled = apply_scaler(scaler, raw_train);
  Dataset test = apply_scaler(scaler, load_libsvm(tf.test_path));
  if (ef.max_eval > 0) test = head(test, static_cast<std::size_t>(ef.max_eval));

  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("cannot write " + out_path);
  out << "kind,depth,num_trees,epsilon,test_accuracy,success_rate,"
         "avg_linf,avg_l1,avg_l2,attacked,successes\n";

  for (int depth : depths) {
    TrainFlags cfg = tf;
    cfg.depth = depth;
    cfg.num_trees = max_trees;
    Ensemble full = train_from_flags(cfg, train_scaled);

    for (int k : tree_counts) {
      // Boosting is sequential and forest trees consume the rng in tree
      // order, so the first k trees are exactly the k-tree model.
      Ensemble prefix = full;
      if (cfg.kind != "tree")
        prefix.trees.resize(std::min<std::size_t>(k, full.trees.size()));

      EvalOptions opt;
      opt.attack = attack_from_name(ef.attack);
      opt.budget = ef.budget;
      opt.seed = tf.seed;  // sweep has a single --seed/--threads pair
      opt.threads = tf.threads;
      opt.train = &train_scaled;
      const EvalReport rep = evaluate_robustness(prefix, test, opt);

      char line[256];
      std::snprintf(line, sizeof(line),
                    "%s,%d,%zu,%s,%.6f,%.6f,%.9g,%.9g,%.9g,%zu,%zu\n",
                    cfg.kind.c_str(), depth, prefix.trees.size(),
                    cfg.epsilon.c_str(), rep.accuracy, rep.success_rate,
                    rep.avg_linf, rep.avg_l1, rep.avg_l2, rep.attacked,
                    rep.successes);
      out << line;
      if (cfg.kind == "tree") break;  // tree count is meaningless here
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"adversarially robust decision trees: train, attack, inspect"};
  app.require_subcommand(1);

  TrainFlags tf;
  CLI::App* train = app.add_subcommand("train", "train a model, write json");
  train->add_option("--train", tf.train_path, "training data (libsvm format)")
      ->required();
  train->add_option("--test", tf.test_path, "optional test data for accuracy");
  train->add_option("--model", tf.model_path, "output model path")->required();
  add_model_flags(train, tf);

  EvalFlags ef;
  CLI::App* eval = app.add_subcommand("eval", "attack a trained model");
  eval->alias("attack");
  eval->add_option("--model", ef.model_path, "model json path")->required();
  eval->add_option("--test", ef.test_path, "examples to attack (libsvm)")
      ->required();
  eval->add_option("--train", ef.train_path,
                   "training data; seeds boundary-attack directions");
  eval->add_option("--out", ef.out_path, "per-example csv report");
  add_eval_flags(eval, ef);

  std::string b_model, b_out;
  int b_grid = 256;
  CLI::App* boundary =
      app.add_subcommand("boundary", "sample a 2-d model's decision map");
  boundary->add_option("--model", b_model, "model json path")->required();
  boundary->add_option("--out", b_out, "csv of x1,x2,label rows")->required();
  boundary->add_option("--grid", b_grid, "cells per axis")
      ->check(CLI::Range(2, 4096));

  TrainFlags sf;
  EvalFlags sef;
  std::string s_trees = "20", s_depths = "5", s_out;
  CLI::App* sweep = app.add_subcommand(
      "sweep", "train/attack across tree counts and depths, write csv");
  sweep->add_option("--train", sf.train_path, "training data")->required();
  sweep->add_option("--test", sf.test_path, "test data")->required();
  sweep->add_option("--out", s_out, "long-format csv output")->required();
  sweep->add_option("--num-trees-list", s_trees, "comma list of tree counts");
  sweep->add_option("--depth-list", s_depths, "comma list of depths");
  add_model_flags(sweep, sf);
  add_eval_flags(sweep, sef, /*with_common=*/false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) return cmd_train(tf);
    if (eval->parsed()) return cmd_eval(ef);
    if (boundary->parsed()) return cmd_boundary(b_model, b_out, b_grid);
    if (sweep->parsed()) return cmd_sweep(sf, sef, s_trees, s_depths, s_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
