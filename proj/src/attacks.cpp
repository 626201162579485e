#include "rtree/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <queue>
#include <random>
#include <stdexcept>

#include "rtree/parallel.hpp"

namespace rtree {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kBelowThreshold = 1e-6;  // step under a '<' constraint
constexpr double kCellDelta = 1e-9;       // inside an open cell boundary

struct Norms {
  double linf = 0.0, l1 = 0.0, l2 = 0.0;
};

Norms diff_norms(std::span<const double> a, std::span<const double> b) {
  Norms n;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double d = std::abs(a[j] - b[j]);
    n.linf = std::max(n.linf, d);
    n.l1 += d;
    n.l2 += d * d;
  }
  n.l2 = std::sqrt(n.l2);
  return n;
}

AttackResult success_result(std::span<const double> x,
                            std::vector<double> x_adv, std::int64_t queries) {
  AttackResult r;
  r.success = true;
  const Norms n = diff_norms(x_adv, x);
  r.linf = n.linf;
  r.l1 = n.l1;
  r.l2 = n.l2;
  r.x_adv = std::move(x_adv);
  r.queries = queries;
  return r;
}

int label01(double y) { return y >= 0.5 ? 1 : 0; }

bool papernot_applicable(const Ensemble& model) {
  // Leaf values must be class labels, which rules out boosted margins.
  return model.trees.size() == 1 &&
         (model.kind == EnsembleKind::single_tree ||
          model.kind == EnsembleKind::random_forest);
}

}  // namespace

AttackResult papernot_attack(const Ensemble& model, std::span<const double> x,
                             int y) {
  if (!papernot_applicable(model))
    throw std::invalid_argument(
        "papernot attack handles single-tree classifiers only");
  const Tree& tree = model.trees[0];
  const std::size_t d = x.size();
  const int nn = static_cast<int>(tree.nodes.size());

  std::vector<int> parent(nn, -1);
  std::vector<std::vector<int>> adj(nn);
  for (int id = 0; id < nn; ++id) {
    const TreeNode& node = tree.nodes[id];
    if (node.is_leaf()) continue;
    parent[node.left] = id;
    parent[node.right] = id;
    adj[id].push_back(node.left);
    adj[id].push_back(node.right);
    adj[node.left].push_back(id);
    adj[node.right].push_back(id);
  }

  const int home = tree.leaf_index(x);
  std::vector<int> dist(nn, -1);
  std::queue<int> bfs;
  bfs.push(home);
  dist[home] = 0;
  while (!bfs.empty()) {
    const int u = bfs.front();
    bfs.pop();
    for (int v : adj[u])
      if (dist[v] < 0) {
        dist[v] = dist[u] + 1;
        bfs.push(v);
      }
  }

  // Opposite-label leaves, nearest in the node graph first.
  std::vector<std::pair<int, int>> cands;
  for (int id = 0; id < nn; ++id) {
    const TreeNode& node = tree.nodes[id];
    if (node.is_leaf() && label01(node.leaf_value) != y)
      cands.emplace_back(dist[id], id);
  }
  std::sort(cands.begin(), cands.end());

  std::int64_t queries = 0;
  std::vector<double> lo(d), hi(d), cand(d);
  for (const auto& pr : cands) {
    const int leaf = pr.second;
    std::fill(lo.begin(), lo.end(), -kInf);
    std::fill(hi.begin(), hi.end(), kInf);
    for (int node = leaf; parent[node] >= 0; node = parent[node]) {
      const TreeNode& p = tree.nodes[parent[node]];
      if (p.left == node)
        hi[p.feature] = std::min(hi[p.feature], p.threshold);
      else
        lo[p.feature] = std::max(lo[p.feature], p.threshold);
    }
    for (std::size_t j = 0; j < d; ++j) {
      double v = x[j];
      if (v < lo[j])
        v = lo[j];  // '>= threshold' attained exactly at the threshold
      else if (v >= hi[j])
        v = hi[j] - kBelowThreshold;
      cand[j] = std::clamp(v, 0.0, 1.0);
    }
    ++queries;
    if (model.predict_label(cand) != y)
      return success_result(x, cand, queries);
  }
  AttackResult fail;
  fail.queries = queries;
  return fail;
}

double boundary_distance(const Ensemble& model, std::span<const double> x,
                         int y, std::span<const double> dir,
                         std::int64_t& queries, std::int64_t budget,
                         double tol) {
  const std::size_t d = x.size();
  double norm = 0.0;
  for (double v : dir) norm = std::max(norm, std::abs(v));
  if (!(norm > 0.0)) return kInf;

  std::vector<double> unit(d), probe(d);
  for (std::size_t j = 0; j < d; ++j) unit[j] = dir[j] / norm;

  // 1: label flipped at this step, 0: not flipped, -1: out of budget
  const auto flips = [&](double lambda) -> int {
    if (queries >= budget) return -1;
    ++queries;
    for (std::size_t j = 0; j < d; ++j)
      probe[j] = std::clamp(x[j] + lambda * unit[j], 0.0, 1.0);
    return model.predict_label(probe) != y ? 1 : 0;
  };

  const double lambda_max = 2.0 * std::sqrt(static_cast<double>(d));
  double lo = 0.0;  // known not to flip (x itself is classified as y)
  double hi = 1e-2;
  int r = 0;
  while (hi < lambda_max) {
    r = flips(hi);
    if (r != 0) break;
    lo = hi;
    hi *= 2.0;
  }
  if (r == -1) return kInf;
  if (r == 0) {
    // doubling stepped past the cap without flipping; probe the cap itself
    hi = lambda_max;
    if (flips(hi) != 1) return kInf;
  }
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    const int m = flips(mid);
    if (m == -1) break;  // budget gone; hi still flips, keep it
    (m == 1 ? hi : lo) = mid;
  }
  return hi;
}

namespace {

// First boundary crossing along dir, probed every scan_step of l-inf
// length up to cap and then bisected to tol. Unlike the doubling search
// this cannot hop over an opposite-class sliver wider than scan_step,
// at the price of cap/scan_step queries per direction.
double scanned_distance(const Ensemble& model, std::span<const double> x,
                        int y, std::span<const double> dir, double cap,
                        double scan_step, std::int64_t& queries,
                        std::int64_t budget, double tol = 1e-5) {
  const std::size_t d = x.size();
  double norm = 0.0;
  for (double v : dir) norm = std::max(norm, std::abs(v));
  if (!(norm > 0.0)) return kInf;

  std::vector<double> unit(d), probe(d);
  for (std::size_t j = 0; j < d; ++j) unit[j] = dir[j] / norm;

  const auto flips = [&](double lambda) -> int {
    if (queries >= budget) return -1;
    ++queries;
    for (std::size_t j = 0; j < d; ++j)
      probe[j] = std::clamp(x[j] + lambda * unit[j], 0.0, 1.0);
    return model.predict_label(probe) != y ? 1 : 0;
  };

  const double lambda_max =
      std::min(cap + scan_step, 2.0 * std::sqrt(static_cast<double>(d)));
  double lo = 0.0;
  double hi = kInf;
  for (double lam = scan_step; lam <= lambda_max; lam += scan_step) {
    const int r = flips(lam);
    if (r == -1) return kInf;
    if (r == 1) {
      hi = lam;
      break;
    }
    lo = lam;
  }
  if (!std::isfinite(hi)) return kInf;
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    const int m = flips(mid);
    if (m == -1) break;  // budget gone; hi still flips, keep it
    (m == 1 ? hi : lo) = mid;
  }
  return hi;
}

// Bisects each coordinate of a flipped point back toward x while the
// label stays flipped, largest perturbation first. Ray search scales all
// coordinates by one lambda, so it leaves slack in coordinates that never
// needed to move as far; this trims that slack and can only shrink the
// l-inf distance.
void tighten_coordinates(const Ensemble& model, std::span<const double> x,
                         int y, std::vector<double>& x_adv,
                         std::int64_t& queries, std::int64_t budget,
                         double tol = 1e-6) {
  const std::size_t d = x.size();
  std::vector<std::size_t> order(d);
  for (std::size_t j = 0; j < d; ++j) order[j] = j;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(x_adv[a] - x[a]) > std::abs(x_adv[b] - x[b]);
  });

  for (std::size_t j : order) {
    if (std::abs(x_adv[j] - x[j]) <= tol || queries >= budget) continue;
    const double flipped = x_adv[j];
    // one query often removes the coordinate entirely
    x_adv[j] = x[j];
    ++queries;
    if (model.predict_label(x_adv) != y) continue;
    double lo = x[j], hi = flipped;
    while (std::abs(hi - lo) > tol && queries < budget) {
      const double mid = 0.5 * (lo + hi);
      x_adv[j] = mid;
      ++queries;
      (model.predict_label(x_adv) != y ? hi : lo) = mid;
    }
    x_adv[j] = hi;
  }
}

// One full init-and-descend pass with a fixed seed and budget slice.
AttackResult cheng_single(const Ensemble& model, std::span<const double> x,
                          int y, const ChengParams& params) {
  const std::size_t d = x.size();
  std::mt19937 rng(params.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::int64_t queries = 0;

  // hold back a slice of the budget for the final tightening pass
  const std::int64_t budget_main =
      params.budget - std::min<std::int64_t>(2000, params.budget / 10);

  std::vector<double> theta_best;
  double g_best = kInf;

  // Keeps the best direction as the exact unit vector the distance was
  // measured along, so the final point can be rebuilt bit for bit.
  const auto keep_if_better = [&](const std::vector<double>& cand, double g) {
    if (g < g_best) {
      double norm = 0.0;
      for (double v : cand) norm = std::max(norm, std::abs(v));
      theta_best.resize(d);
      for (std::size_t j = 0; j < d; ++j) theta_best[j] = cand[j] / norm;
      g_best = g;
    }
  };
  const auto consider = [&](const std::vector<double>& cand) {
    keep_if_better(
        cand, boundary_distance(model, x, y, cand, queries, budget_main));
  };

  std::vector<double> dir(d);
  for (int k = 0; k < params.random_init_dirs && queries < budget_main; ++k) {
    for (double& v : dir) v = gauss(rng);
    consider(dir);
  }
  if (params.init_data != nullptr && params.init_data->feature_count() == d) {
    int used = 0;
    for (std::size_t i = 0; i < params.init_data->example_count() &&
                            used < params.data_init_dirs &&
                            queries < budget_main;
         ++i) {
      if (label01(params.init_data->label(i)) == y) continue;
      double norm = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        dir[j] = params.init_data->feature(i, j) - x[j];
        norm = std::max(norm, std::abs(dir[j]));
      }
      if (!(norm > 0.0)) continue;
      ++used;
      // The seeded example sits at lambda = norm along this ray, so the
      // fine scan needs to go no further than that to cross every
      // opposite-class region between x and the example.
      if (params.scan_step > 0.0)
        keep_if_better(dir, scanned_distance(model, x, y, dir, norm,
                                             params.scan_step, queries,
                                             budget_main));
      else
        consider(dir);
    }
  }
  // Axis probes: tree ensembles often admit a flip by nudging a single
  // feature across a threshold, a ray that random or data directions
  // rarely align with.
  if (params.scan_step > 0.0) {
    for (std::size_t j = 0; j < d && queries < budget_main; ++j) {
      for (const double sgn : {1.0, -1.0}) {
        const double cap = sgn > 0 ? 1.0 - x[j] : x[j];
        if (!(cap > 0.0)) continue;
        std::fill(dir.begin(), dir.end(), 0.0);
        dir[j] = sgn;
        keep_if_better(dir, scanned_distance(model, x, y, dir, cap,
                                             params.scan_step, queries,
                                             budget_main));
      }
    }
  }

  AttackResult out;
  if (!std::isfinite(g_best)) {
    out.queries = queries;
    return out;
  }

  // Distance along cand measured only relative to an incumbent: probe at
  // `upper` first and bisect below on a flip, +inf otherwise. Immune to
  // the doubling search's habit of locking onto a farther boundary, which
  // would poison gradient estimates.
  std::vector<double> probe_pt(d);
  const auto bounded_distance = [&](std::span<const double> cand_dir,
                                    double upper) -> double {
    double norm = 0.0;
    for (double v : cand_dir) norm = std::max(norm, std::abs(v));
    if (!(norm > 0.0) || queries >= budget_main) return kInf;
    const auto flips_at = [&](double lambda) {
      ++queries;
      for (std::size_t j = 0; j < d; ++j)
        probe_pt[j] = std::clamp(x[j] + lambda * cand_dir[j] / norm, 0.0, 1.0);
      return model.predict_label(probe_pt) != y;
    };
    if (!flips_at(upper)) return kInf;
    double lo = 0.0, hi = upper;
    while (hi - lo > 1e-5 && queries < budget_main) {
      const double mid = 0.5 * (lo + hi);
      (flips_at(mid) ? hi : lo) = mid;
    }
    return hi;
  };

  // Random-gradient-free descent on g(theta): estimate the gradient from
  // the signs of a few random tilts (did the tilt land nearer than the
  // incumbent or not), step against it, keep the step only if g improves.
  double alpha = params.alpha0;
  const int probes = 8;
  std::vector<double> u(d), grad(d), cand(d);
  while (queries + probes < budget_main) {
    std::fill(grad.begin(), grad.end(), 0.0);
    for (int k = 0; k < probes; ++k) {
      double norm2 = 0.0;
      for (double& v : u) {
        v = gauss(rng);
        norm2 += v * v;
      }
      norm2 = std::sqrt(norm2);
      if (!(norm2 > 0.0)) continue;
      for (std::size_t j = 0; j < d; ++j)
        cand[j] = theta_best[j] + params.beta * u[j] / norm2;
      const double g_probe = bounded_distance(cand, g_best);
      const double sgn = g_probe < g_best ? -1.0 : 1.0;
      for (std::size_t j = 0; j < d; ++j) grad[j] += sgn * u[j] / norm2;
    }

    for (std::size_t j = 0; j < d; ++j)
      cand[j] = theta_best[j] - alpha * grad[j] / probes;
    double norm = 0.0;
    for (double v : cand) norm = std::max(norm, std::abs(v));
    if (!(norm > 0.0)) {
      alpha *= 0.5;
      continue;
    }
    const double g_cand = bounded_distance(cand, g_best);
    if (g_cand < g_best) {
      for (std::size_t j = 0; j < d; ++j) theta_best[j] = cand[j] / norm;
      g_best = g_cand;
      alpha *= 1.5;
    } else {
      alpha *= 0.5;
      if (alpha < 1e-3) alpha = params.alpha0;  // keep exploring
    }
  }

  // The point g_best was measured at: same normalization, same clamping.
  std::vector<double> x_adv(d);
  for (std::size_t j = 0; j < d; ++j)
    x_adv[j] = std::clamp(x[j] + g_best * theta_best[j], 0.0, 1.0);
  tighten_coordinates(model, x, y, x_adv, queries,
                      params.budget);

  // Alternate: the tightened point defines a new ray, a fine rescan along
  // it can reveal an earlier crossing, and that point tightens again.
  for (int round = 0; round < 3 && params.scan_step > 0.0; ++round) {
    double norm = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      dir[j] = x_adv[j] - x[j];
      norm = std::max(norm, std::abs(dir[j]));
    }
    if (!(norm > 0.0)) break;
    const double g = scanned_distance(model, x, y, dir, norm,
                                      params.scan_step / 4, queries,
                                      params.budget);
    if (!(g < norm - 1e-9)) break;
    for (std::size_t j = 0; j < d; ++j)
      x_adv[j] = std::clamp(x[j] + g * (dir[j] / norm), 0.0, 1.0);
    tighten_coordinates(model, x, y, x_adv, queries, params.budget);
  }
  return success_result(x, std::move(x_adv), queries);
}

}  // namespace

AttackResult cheng_attack_linf(const Ensemble& model,
                               std::span<const double> x, int y,
                               const ChengParams& params) {
  const int restarts = std::max(params.restarts, 1);
  ChengParams sub = params;
  sub.restarts = 1;
  sub.budget = params.budget / restarts;
  AttackResult best;
  std::int64_t total_queries = 0;
  for (int r = 0; r < restarts; ++r) {
    // distinct but reproducible stream per restart; r = 0 keeps the seed
    sub.seed = params.seed + 0x9e3779b9u * static_cast<unsigned>(r);
    AttackResult res = cheng_single(model, x, y, sub);
    total_queries += res.queries;
    if (res.success && (!best.success || res.linf < best.linf))
      best = std::move(res);
  }
  best.queries = total_queries;
  return best;
}

double CellGrid::cell_count() const {
  double p = 1.0;
  for (const auto& t : thresholds)
    p *= static_cast<double>(t.size() + 1);
  return p;
}

CellGrid build_cell_grid(const Ensemble& model, std::size_t feature_count) {
  CellGrid g;
  g.thresholds.resize(feature_count);
  for (const Tree& t : model.trees) {
    for (const TreeNode& n : t.nodes) {
      if (n.is_leaf()) continue;
      if (static_cast<std::size_t>(n.feature) >= feature_count)
        throw std::invalid_argument(
            "model splits on feature " + std::to_string(n.feature) +
            " but the data has " + std::to_string(feature_count));
      // thresholds outside (0,1] route every unit-box point the same way
      if (n.threshold > 0.0 && n.threshold <= 1.0)
        g.thresholds[static_cast<std::size_t>(n.feature)].push_back(n.threshold);
    }
  }
  for (auto& v : g.thresholds) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  }
  return g;
}

AttackResult exact_attack_small(const Ensemble& model,
                                std::span<const double> x, int y) {
  if (!model.is_classifier())
    throw std::invalid_argument("exact attack needs a classification model");
  const std::size_t d = x.size();
  const CellGrid grid = build_cell_grid(model, d);
  const double cells = grid.cell_count();
  if (cells > kCellGuard) {
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "exact attack would enumerate %.3g cells (limit %.3g); "
                  "use the boundary attack instead",
                  cells, kCellGuard);
    throw CellGuardExceeded(buf);
  }

  std::int64_t queries = 0;
  std::vector<std::size_t> idx(d, 0);
  std::vector<double> witness(d), best_witness;
  double best_dist = kInf;

  for (;;) {
    // Nearest point of this cell to x, respecting [left, right) routing;
    // strictly-inside boundaries are approached to within kCellDelta.
    double dist = 0.0;
    bool feasible = true;
    for (std::size_t j = 0; j < d && feasible; ++j) {
      const auto& t = grid.thresholds[j];
      const double left = idx[j] == 0 ? 0.0 : t[idx[j] - 1];
      const double right = idx[j] == t.size() ? kInf : t[idx[j]];
      double target = x[j];
      if (x[j] < left) {
        target = left;
      } else if (x[j] >= right) {
        target = right - kCellDelta;
        feasible = target >= left;
      }
      witness[j] = target;
      dist = std::max(dist, std::abs(target - x[j]));
    }
    if (feasible && dist < best_dist) {
      ++queries;
      if (model.predict_label(witness) != y) {
        best_dist = dist;
        best_witness = witness;
      }
    }
    std::size_t j = 0;
    for (; j < d; ++j) {
      if (idx[j] < grid.thresholds[j].size()) {
        ++idx[j];
        break;
      }
      idx[j] = 0;
    }
    if (j == d) break;
  }

  if (best_witness.empty()) {
    AttackResult fail;
    fail.queries = queries;
    return fail;
  }
  return success_result(x, std::move(best_witness), queries);
}

std::string attack_name(AttackKind k) {
  switch (k) {
    case AttackKind::papernot: return "papernot";
    case AttackKind::boundary: return "boundary";
    case AttackKind::exact: return "exact";
  }
  throw std::logic_error("unknown attack kind");
}

AttackKind attack_from_name(const std::string& name) {
  if (name == "papernot") return AttackKind::papernot;
  if (name == "boundary") return AttackKind::boundary;
  if (name == "exact") return AttackKind::exact;
  throw std::runtime_error("unknown attack '" + name + "'");
}

EvalReport evaluate_robustness(const Ensemble& model, const Dataset& test,
                               const EvalOptions& opt) {
  if (!model.is_classifier())
    throw std::invalid_argument(
        "robustness evaluation needs a classification model");
  if (opt.attack == AttackKind::papernot && !papernot_applicable(model))
    throw std::invalid_argument(
        "papernot attack handles single-tree classifiers only");

  const std::size_t n = test.example_count();
  EvalReport report;
  report.total = n;
  report.rows.resize(n);

  std::exception_ptr first_error;
  std::mutex error_mutex;
  parallel_for(n, opt.threads, [&](std::size_t i) {
    try {
      ExampleReport& row = report.rows[i];
      row.example_id = static_cast<int>(i);
      row.true_label = label01(test.label(i));
      row.pred_label = model.predict_label(test.row(i));
      if (row.pred_label != row.true_label) return;
      row.attacked = true;
      switch (opt.attack) {
        case AttackKind::papernot:
          row.result = papernot_attack(model, test.row(i), row.true_label);
          break;
        case AttackKind::boundary: {
          ChengParams p;
          p.budget = opt.budget;
          p.seed = opt.seed + static_cast<unsigned>(i);
          p.init_data = opt.train;
          row.result = cheng_attack_linf(model, test.row(i), row.true_label, p);
          break;
        }
        case AttackKind::exact:
          row.result = exact_attack_small(model, test.row(i), row.true_label);
          break;
      }
    } catch (...) {
      const std::lock_guard<std::mutex> lock(error_mutex);
      if (!first_error) first_error = std::current_exception();
    }
  });
  if (first_error) std::rethrow_exception(first_error);

  for (const ExampleReport& row : report.rows) {
    if (row.pred_label == row.true_label) ++report.correct;
    if (!row.attacked) continue;
    ++report.attacked;
    if (row.result.success) {
      ++report.successes;
      report.avg_linf += row.result.linf;
      report.avg_l1 += row.result.l1;
      report.avg_l2 += row.result.l2;
    }
  }
  report.accuracy =
      n > 0 ? static_cast<double>(report.correct) / static_cast<double>(n) : 0.0;
  if (report.attacked > 0)
    report.success_rate = static_cast<double>(report.successes) /
                          static_cast<double>(report.attacked);
  if (report.successes > 0) {
    report.avg_linf /= static_cast<double>(report.successes);
    report.avg_l1 /= static_cast<double>(report.successes);
    report.avg_l2 /= static_cast<double>(report.successes);
  }
  return report;
}

void write_eval_csv(const EvalReport& report, AttackKind attack,
                    const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  const auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return std::string(buf);
  };
  out << "example_id,true_label,pred_label,attack,success,linf,l1,l2,queries\n";
  for (const ExampleReport& r : report.rows) {
    const bool s = r.attacked && r.result.success;
    out << r.example_id << ',' << r.true_label << ',' << r.pred_label << ','
        << attack_name(attack) << ',' << (s ? 1 : 0) << ','
        << (s ? num(r.result.linf) : "") << ','
        << (s ? num(r.result.l1) : "") << ','
        << (s ? num(r.result.l2) : "") << ',' << r.result.queries << '\n';
  }
}

double worst_case_accuracy(const Ensemble& model, const Dataset& test,
                           const RobustConfig& cfg) {
  if (!model.is_classifier())
    throw std::invalid_argument("worst-case accuracy needs a classifier");
  const std::size_t d = test.feature_count();
  cfg.check_dimension(d);
  const CellGrid grid = build_cell_grid(model, d);

  std::size_t robust_correct = 0;
  std::vector<std::size_t> first(d), last(d), idx(d);
  std::vector<double> rep(d);
  for (std::size_t i = 0; i < test.example_count(); ++i) {
    const auto x = test.row(i);
    const int y = label01(test.label(i));

    // Reachable interval range per feature: those overlapping the box
    // [x-eps, x+eps] clipped to the unit box, under [left, right) routing.
    double combos = 1.0;
    for (std::size_t j = 0; j < d; ++j) {
      const auto& t = grid.thresholds[j];
      const double box_lo = std::max(0.0, x[j] - cfg.epsilon(j));
      const double box_hi = std::min(1.0, x[j] + cfg.epsilon(j));
      // interval k spans [t[k-1], t[k]); reachable iff left <= box_hi
      // and box_lo < right
      std::size_t f = 0;
      while (f < t.size() && !(box_lo < t[f])) ++f;
      std::size_t l = t.size();
      while (l > 0 && !(t[l - 1] <= box_hi)) --l;
      first[j] = f;
      last[j] = l;
      combos *= static_cast<double>(l - f + 1);
    }
    if (combos > kCellGuard) {
      char buf[160];
      std::snprintf(buf, sizeof(buf),
                    "worst-case check would enumerate %.3g cells (limit %.3g)",
                    combos, kCellGuard);
      throw CellGuardExceeded(buf);
    }

    idx = first;
    bool safe = true;
    for (;;) {
      for (std::size_t j = 0; j < d; ++j) {
        const auto& t = grid.thresholds[j];
        const double left = idx[j] == 0 ? 0.0 : t[idx[j] - 1];
        const double box_lo = std::max(0.0, x[j] - cfg.epsilon(j));
        rep[j] = std::max(left, box_lo);
      }
      if (model.predict_label(rep) != y) {
        safe = false;
        break;
      }
      std::size_t j = 0;
      for (; j < d; ++j) {
        if (idx[j] < last[j]) {
          ++idx[j];
          break;
        }
        idx[j] = first[j];
      }
      if (j == d) break;
    }
    if (safe) ++robust_correct;
  }
  return test.example_count() > 0
             ? static_cast<double>(robust_correct) /
                   static_cast<double>(test.example_count())
             : 0.0;
}

}  // namespace rtree
