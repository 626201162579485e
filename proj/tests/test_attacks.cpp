#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "rtree/attacks.hpp"
#include "rtree/boosting.hpp"
#include "toy_data.hpp"

using namespace rtree;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Tree stump_tree(int feature, double threshold, double left_val,
                double right_val) {
  Tree t;
  const int root = t.add_internal(feature, threshold);
  t.nodes[root].left = t.add_leaf(left_val);
  t.nodes[root].right = t.add_leaf(right_val);
  return t;
}

Ensemble stump_model(int feature, double threshold, double left_val,
                     double right_val) {
  Ensemble m;
  m.kind = EnsembleKind::single_tree;
  m.trees.push_back(stump_tree(feature, threshold, left_val, right_val));
  return m;
}

Ensemble constant_model(double value) {
  Tree t;
  t.add_leaf(value);
  Ensemble m;
  m.kind = EnsembleKind::single_tree;
  m.trees.push_back(std::move(t));
  return m;
}

// one stump per (feature, threshold) pair; blows up the cell count on purpose
Ensemble many_threshold_model(int features, int per_feature) {
  Ensemble m;
  m.kind = EnsembleKind::gbdt_binary;
  for (int j = 0; j < features; ++j)
    for (int k = 1; k <= per_feature; ++k)
      m.trees.push_back(
          stump_tree(j, static_cast<double>(k) / (per_feature + 1), -0.01, 0.01));
  return m;
}

Ensemble single_tree_model(Tree t) {
  Ensemble m;
  m.kind = EnsembleKind::single_tree;
  m.trees.push_back(std::move(t));
  return m;
}

}  // namespace

TEST_CASE("papernot: moves onto the nearest opposite leaf's box") {
  const Ensemble m = stump_model(0, 0.5, 0.0, 1.0);

  AttackResult r = papernot_attack(m, std::vector<double>{0.3}, 0);
  REQUIRE(r.success);
  CHECK(r.x_adv[0] == 0.5);  // right side starts exactly at the threshold
  CHECK(r.linf == doctest::Approx(0.2));
  CHECK(m.predict_label(r.x_adv) == 1);

  r = papernot_attack(m, std::vector<double>{0.7}, 1);
  REQUIRE(r.success);
  CHECK(r.x_adv[0] < 0.5);  // strictly below: the left box is open at 0.5
  CHECK(r.x_adv[0] == doctest::Approx(0.5).epsilon(1e-5));
  CHECK(m.predict_label(r.x_adv) == 0);
}

TEST_CASE("papernot: untouched coordinates stay put") {
  // root: f0 < 0.5 -> inner, else leaf(1); inner: f1 < 0.4 -> leaf(0), else leaf(1)
  Tree t;
  const int root = t.add_internal(0, 0.5);
  const int inner = t.add_internal(1, 0.4);
  const int leaf00 = t.add_leaf(0.0);
  const int leaf01 = t.add_leaf(1.0);
  const int leaf1 = t.add_leaf(1.0);
  t.nodes[root].left = inner;
  t.nodes[root].right = leaf1;
  t.nodes[inner].left = leaf00;
  t.nodes[inner].right = leaf01;
  const Ensemble m = single_tree_model(std::move(t));

  // x = (0.2, 0.1) sits in the all-left leaf; the nearest opposite leaf in
  // the node graph needs only f1 >= 0.4, so f0 must survive unchanged
  const AttackResult res = papernot_attack(m, std::vector<double>{0.2, 0.1}, 0);
  REQUIRE(res.success);
  CHECK(res.x_adv[0] == 0.2);
  CHECK(res.x_adv[1] == doctest::Approx(0.4));
  CHECK(m.predict_label(res.x_adv) == 1);
}

TEST_CASE("papernot: fails cleanly when no opposite leaf exists") {
  const Ensemble m = constant_model(0.0);
  const AttackResult r = papernot_attack(m, std::vector<double>{0.5}, 0);
  CHECK_FALSE(r.success);
  CHECK(r.linf == kInf);
}

TEST_CASE("papernot: rejects multi-tree models") {
  std::mt19937 rng(3);
  const Dataset d = fixtures::separable_dataset(rng, 40, 2);
  BoostParams bp;
  bp.num_trees = 2;
  const Ensemble m = train_gbdt(d, bp);
  CHECK_THROWS_AS(papernot_attack(m, d.row(0), 0), std::invalid_argument);
}

TEST_CASE("boundary_distance: bisects the stump boundary to tolerance") {
  const Ensemble m = stump_model(0, 0.5, 0.0, 1.0);
  std::int64_t queries = 0;

  const double g =
      boundary_distance(m, std::vector<double>{0.3}, 0, std::vector<double>{1.0},
                        queries);
  CHECK(std::abs(g - 0.2) <= 2e-5);
  CHECK(queries > 0);

  // direction scaling must not matter; powers of two are exactly invariant
  std::int64_t q2 = 0;
  const double g4 = boundary_distance(m, std::vector<double>{0.3}, 0,
                                      std::vector<double>{4.0}, q2);
  CHECK(g4 == g);
  std::int64_t q3 = 0;
  const double g27 = boundary_distance(m, std::vector<double>{0.3}, 0,
                                       std::vector<double>{2.7}, q3);
  CHECK(std::abs(g27 - g) <= 1e-9);
}

TEST_CASE("boundary_distance: diagonal direction normalized by max coordinate") {
  const Ensemble m = stump_model(0, 0.5, 0.0, 1.0);
  std::int64_t queries = 0;
  const double g =
      boundary_distance(m, std::vector<double>{0.3, 0.3}, 0,
                        std::vector<double>{1.0, 1.0}, queries);
  CHECK(std::abs(g - 0.2) <= 2e-5);
}

TEST_CASE("boundary_distance: no flip along the ray gives infinity") {
  const Ensemble m = stump_model(0, 0.5, 0.0, 1.0);
  std::int64_t queries = 0;
  // moving left from 0.3 clamps at 0 and never crosses 0.5
  const double g = boundary_distance(m, std::vector<double>{0.3}, 0,
                                     std::vector<double>{-1.0}, queries);
  CHECK(g == kInf);
}

TEST_CASE("boundary_distance: respects the query budget") {
  const Ensemble m = stump_model(0, 0.5, 0.0, 1.0);
  std::int64_t queries = 0;
  const double g = boundary_distance(m, std::vector<double>{0.3}, 0,
                                     std::vector<double>{1.0}, queries, 3);
  CHECK(queries <= 3);
  // three queries cannot finish the bracket + bisection to 1e-5
  CHECK(g == kInf);
}

TEST_CASE("cheng attack: nails the stump distance in one dimension") {
  const Ensemble m = stump_model(0, 0.5, 0.0, 1.0);
  ChengParams cp;
  cp.budget = 4000;
  cp.seed = 7;
  const AttackResult r = cheng_attack_linf(m, std::vector<double>{0.3}, 0, cp);
  REQUIRE(r.success);
  CHECK(r.linf >= 0.2 - 1e-12);
  CHECK(r.linf <= 0.2 + 1e-3);
  CHECK(m.predict_label(r.x_adv) == 1);
  CHECK(r.queries <= cp.budget);
}

TEST_CASE("cheng attack: irrelevant features do not inflate the distance") {
  const Ensemble m = stump_model(0, 0.5, 0.0, 1.0);
  ChengParams cp;
  cp.budget = 8000;
  cp.seed = 11;
  const AttackResult r =
      cheng_attack_linf(m, std::vector<double>{0.3, 0.6, 0.2}, 0, cp);
  REQUIRE(r.success);
  CHECK(r.linf <= 0.2 + 2e-3);
  CHECK(m.predict_label(r.x_adv) == 1);
}

TEST_CASE("cheng attack: deterministic under a fixed seed") {
  std::mt19937 rng(13);
  const Dataset d = fixtures::separable_dataset(rng, 60, 3);
  BoostParams bp;
  bp.num_trees = 4;
  bp.max_depth = 3;
  const Ensemble m = train_gbdt(d, bp);
  ChengParams cp;
  cp.budget = 3000;
  cp.seed = 17;

  int attacked = 0;
  for (std::size_t i = 0; i < d.example_count() && attacked < 5; ++i) {
    const int y = d.label(i) >= 0.5 ? 1 : 0;
    if (m.predict_label(d.row(i)) != y) continue;
    ++attacked;
    const AttackResult a = cheng_attack_linf(m, d.row(i), y, cp);
    const AttackResult b = cheng_attack_linf(m, d.row(i), y, cp);
    CHECK(a.success == b.success);
    CHECK(a.queries == b.queries);
    if (a.success) {
      CHECK(a.linf == b.linf);
      REQUIRE(a.x_adv == b.x_adv);
      CHECK(m.predict_label(a.x_adv) != y);
    }
  }
  REQUIRE(attacked == 5);
}

TEST_CASE("cheng attack: data-seeded directions reach a far-away plateau") {
  // label 1 only on {f0 >= 0.9 and f1 >= 0.9}; rays from (0.05,...) need
  // both lead coordinates near the l-inf max, which the opposite-class
  // example supplies directly
  Tree t;
  const int root = t.add_internal(0, 0.9);
  const int inner = t.add_internal(1, 0.9);
  const int far_leaf = t.add_leaf(0.0);
  const int and_leaf0 = t.add_leaf(0.0);
  const int and_leaf1 = t.add_leaf(1.0);
  t.nodes[root].left = far_leaf;
  t.nodes[root].right = inner;
  t.nodes[inner].left = and_leaf0;
  t.nodes[inner].right = and_leaf1;
  const Ensemble m = single_tree_model(std::move(t));

  const Dataset seeds =
      fixtures::make_dataset({0.95, 0.95, 0.95, 0.95}, {1.0}, 4);
  ChengParams cp;
  cp.budget = 6000;
  cp.seed = 19;
  cp.random_init_dirs = 2;
  cp.init_data = &seeds;

  const std::vector<double> x{0.05, 0.05, 0.05, 0.05};
  const AttackResult r = cheng_attack_linf(m, x, 0, cp);
  REQUIRE(r.success);
  CHECK(m.predict_label(r.x_adv) == 1);
  CHECK(r.linf <= 0.9);
}

TEST_CASE("cheng attack: reports failure when the model is constant") {
  const Ensemble m = constant_model(0.0);
  ChengParams cp;
  cp.budget = 500;
  cp.seed = 23;
  const AttackResult r = cheng_attack_linf(m, std::vector<double>{0.4}, 0, cp);
  CHECK_FALSE(r.success);
  CHECK(r.linf == kInf);
  CHECK(r.queries <= cp.budget);
}

TEST_CASE("cell grid: thresholds collected per feature, non-separating ones dropped") {
  Ensemble m;
  m.kind = EnsembleKind::random_forest;
  m.trees.push_back(stump_tree(0, 0.5, 0.0, 1.0));
  m.trees.push_back(stump_tree(1, 0.25, 0.0, 1.0));
  m.trees.push_back(stump_tree(0, 1.5, 0.0, 1.0));   // right side empty in the box
  m.trees.push_back(stump_tree(0, 0.5, 1.0, 0.0));   // duplicate threshold
  m.trees.push_back(stump_tree(2, -0.1, 0.0, 1.0));  // left side empty

  const CellGrid grid = build_cell_grid(m, 3);
  REQUIRE(grid.thresholds.size() == 3);
  CHECK(grid.thresholds[0] == std::vector<double>{0.5});
  CHECK(grid.thresholds[1] == std::vector<double>{0.25});
  CHECK(grid.thresholds[2].empty());
  CHECK(grid.cell_count() == 4.0);
}

TEST_CASE("exact attack: stump distances are computed, not searched") {
  const Ensemble m = stump_model(0, 0.5, 0.0, 1.0);

  AttackResult r = exact_attack_small(m, std::vector<double>{0.3}, 0);
  REQUIRE(r.success);
  CHECK(r.x_adv[0] == 0.5);  // the flip region is closed on the left
  CHECK(r.linf == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(m.predict_label(r.x_adv) == 1);

  // from the right the flip must land strictly below the threshold
  r = exact_attack_small(m, std::vector<double>{0.7}, 1);
  REQUIRE(r.success);
  CHECK(r.x_adv[0] < 0.5);
  CHECK(r.linf >= 0.2);
  CHECK(r.linf <= 0.2 + 1e-8);
  CHECK(m.predict_label(r.x_adv) == 0);
}

TEST_CASE("exact attack: agrees with a dense grid certificate in 2-d") {
  std::mt19937 rng(29);
  const int grid_n = 220;
  int models_checked = 0;
  while (models_checked < 6) {
    const Dataset d = fixtures::random_dataset(rng, 40, 2);
    TreeParams tp;
    tp.max_depth = 3;
    const Tree t = train_tree_ig(d, tp);
    if (t.nodes.size() < 3) continue;
    ++models_checked;
    const Ensemble m = single_tree_model(t);

    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int pt = 0; pt < 4; ++pt) {
      const std::vector<double> x{unif(rng), unif(rng)};
      const int y = m.predict_label(x);
      const AttackResult r = exact_attack_small(m, x, y);
      const double grid_min = oracle::grid_min_flip_2d(m, x, y, grid_n);
      if (!r.success) {
        REQUIRE(grid_min == kInf);  // nothing on the grid may flip either
        continue;
      }
      CHECK(m.predict_label(r.x_adv) != y);
      // the exact result can only undercut the grid scan...
      REQUIRE(r.linf <= grid_min + 1e-9);
      // ...and the grid pins it from above within one cell width
      if (grid_min < kInf) REQUIRE(grid_min <= r.linf + 1.5 / grid_n);
    }
  }
}

TEST_CASE("exact attack: refuses when the cell count explodes") {
  const Ensemble m = many_threshold_model(8, 24);  // 25^8 cells
  CHECK_THROWS_AS(exact_attack_small(m, std::vector<double>(8, 0.5), 0),
                  CellGuardExceeded);
}

TEST_CASE("evaluate_robustness: toy stump, exact attack flips every correct point") {
  const Dataset toy = fixtures::toy_two_feature();
  TreeParams tp;
  tp.max_depth = 1;
  const Ensemble m = single_tree_model(train_tree_ig(toy, tp));

  EvalOptions opt;
  opt.attack = AttackKind::exact;
  const EvalReport rep = evaluate_robustness(m, toy, opt);
  CHECK(rep.total == 10);
  CHECK(rep.correct == 8);
  CHECK(rep.accuracy == doctest::Approx(0.8));
  CHECK(rep.attacked == 8);
  CHECK(rep.successes == 8);
  CHECK(rep.success_rate == doctest::Approx(1.0));
  CHECK(rep.avg_linf > 0.0);
  REQUIRE(rep.rows.size() == 10);
  for (const ExampleReport& row : rep.rows) {
    if (!row.attacked) continue;
    CHECK(row.result.success);
    CHECK(row.result.linf < kInf);
  }
}

TEST_CASE("evaluate_robustness: nothing correct means nothing attacked") {
  const Dataset d = fixtures::make_dataset({0.1, 0.5, 0.9}, {0, 0, 0}, 1);
  const Ensemble m = constant_model(1.0);  // predicts 1 everywhere
  EvalOptions opt;
  opt.attack = AttackKind::exact;
  const EvalReport rep = evaluate_robustness(m, d, opt);
  CHECK(rep.correct == 0);
  CHECK(rep.attacked == 0);
  CHECK(rep.successes == 0);
  CHECK(rep.success_rate == 0.0);
  CHECK(rep.avg_linf == 0.0);
}

TEST_CASE("evaluate_robustness: per-example seeding keeps results thread-invariant") {
  std::mt19937 rng(31);
  const Dataset train = fixtures::separable_dataset(rng, 80, 3);
  const Dataset test = fixtures::separable_dataset(rng, 24, 3);
  BoostParams bp;
  bp.num_trees = 4;
  bp.max_depth = 3;
  const Ensemble m = train_gbdt(train, bp);

  EvalOptions opt;
  opt.attack = AttackKind::boundary;
  opt.budget = 2000;
  opt.seed = 5;
  opt.threads = 1;
  const EvalReport serial = evaluate_robustness(m, test, opt);
  opt.threads = 4;
  const EvalReport threaded = evaluate_robustness(m, test, opt);

  REQUIRE(serial.rows.size() == threaded.rows.size());
  for (std::size_t i = 0; i < serial.rows.size(); ++i) {
    CHECK(serial.rows[i].attacked == threaded.rows[i].attacked);
    CHECK(serial.rows[i].result.success == threaded.rows[i].result.success);
    CHECK(serial.rows[i].result.linf == threaded.rows[i].result.linf);
    CHECK(serial.rows[i].result.queries == threaded.rows[i].result.queries);
  }
  CHECK(serial.success_rate == threaded.success_rate);
}

TEST_CASE("evaluate_robustness: papernot on a multi-tree model is refused") {
  std::mt19937 rng(33);
  const Dataset d = fixtures::separable_dataset(rng, 40, 2);
  ForestParams fp;
  fp.num_trees = 3;
  const Ensemble m = train_random_forest(d, fp);
  EvalOptions opt;
  opt.attack = AttackKind::papernot;
  CHECK_THROWS_AS(evaluate_robustness(m, d, opt), std::invalid_argument);
}

TEST_CASE("evaluate_robustness: csv layout") {
  const Dataset toy = fixtures::toy_two_feature();
  TreeParams tp;
  tp.max_depth = 1;
  const Ensemble m = single_tree_model(train_tree_ig(toy, tp));
  EvalOptions opt;
  opt.attack = AttackKind::exact;
  const EvalReport rep = evaluate_robustness(m, toy, opt);

  const std::string path = "tmp_attacks_eval.csv";
  write_eval_csv(rep, AttackKind::exact, path);
  std::ifstream in(path);
  REQUIRE(in.good());
  std::string line;
  REQUIRE(std::getline(in, line));
  CHECK(line ==
        "example_id,true_label,pred_label,attack,success,linf,l1,l2,queries");
  std::size_t rows = 0;
  std::size_t successes = 0;
  while (std::getline(in, line)) {
    ++rows;
    std::size_t commas = 0;
    for (char c : line)
      if (c == ',') ++commas;
    CHECK(commas == 8);
    if (line.find(",exact,1,") != std::string::npos) ++successes;
  }
  CHECK(rows == 10);
  CHECK(successes == 8);
  in.close();
  std::remove(path.c_str());
}

TEST_CASE("worst-case accuracy: toy set, fragile vs robust stump") {
  const Dataset toy = fixtures::toy_two_feature();
  TreeParams tp;
  tp.max_depth = 1;
  const Ensemble natural = single_tree_model(train_tree_ig(toy, tp));

  tp.epsilon = RobustConfig(0.1);
  const Ensemble robust = single_tree_model(train_tree_ig(toy, tp));

  const RobustConfig ball(0.1);
  CHECK(worst_case_accuracy(natural, toy, ball) == doctest::Approx(0.0));
  CHECK(worst_case_accuracy(robust, toy, ball) == doctest::Approx(0.7));
}

TEST_CASE("worst-case accuracy: zero radius is plain accuracy") {
  std::mt19937 rng(37);
  const Dataset d = fixtures::separable_dataset(rng, 50, 3);
  BoostParams bp;
  bp.num_trees = 3;
  bp.max_depth = 3;
  const Ensemble m = train_gbdt(d, bp);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < d.example_count(); ++i)
    if (m.predict_label(d.row(i)) == (d.label(i) >= 0.5 ? 1 : 0)) ++correct;
  const double acc = static_cast<double>(correct) / d.example_count();
  CHECK(worst_case_accuracy(m, d, RobustConfig(0.0)) == doctest::Approx(acc));
}

TEST_CASE("worst-case accuracy: guarded against cell blowup") {
  // eps = 0.5 makes every threshold reachable from the single example,
  // so the per-example cell product is 25^8 and must trip the guard
  const Ensemble m = many_threshold_model(8, 24);
  const Dataset d =
      fixtures::make_dataset(std::vector<double>(8, 0.5), {0.0}, 8);
  CHECK_THROWS_AS(worst_case_accuracy(m, d, RobustConfig(0.5)),
                  CellGuardExceeded);
}
