#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rtree/dataset.hpp"
#include "rtree/model.hpp"

namespace rtree {

// Outcome of one adversarial search around one example. Norms are measured
// on the returned (clamped) point; infinity when no example was found.
struct AttackResult {
  bool success = false;
  std::vector<double> x_adv;
  double linf = std::numeric_limits<double>::infinity();
  double l1 = std::numeric_limits<double>::infinity();
  double l2 = std::numeric_limits<double>::infinity();
  std::int64_t queries = 0;
};

// Walks leaves of a single decision tree outward from x's own leaf (by
// node-graph distance) until one with the opposite label admits a point
// inside the unit box; builds that point by snapping only the violated
// path constraints to their thresholds. Query-free heuristic apart from
// verification calls; no distance optimality claimed.
AttackResult papernot_attack(const Ensemble& model, std::span<const double> x,
                             int y);

// Distance from x to the decision boundary along direction dir (scaled to
// unit l-inf length), found by doubling until the label flips and then
// bisecting to `tol`. Returns +inf when nothing flips within 2*sqrt(d) or
// the query budget runs out first. The returned lambda always satisfies
// label(clamp(x + lambda*dir/|dir|inf)) != y.
double boundary_distance(const Ensemble& model, std::span<const double> x,
                         int y, std::span<const double> dir,
                         std::int64_t& queries,
                         std::int64_t budget = std::numeric_limits<std::int64_t>::max(),
                         double tol = 1e-5);

struct ChengParams {
  std::int64_t budget = 20000;  // total model evaluations, across restarts
  unsigned seed = 0;
  int random_init_dirs = 20;
  int data_init_dirs = 40;      // directions toward other-class examples
  double beta = 0.01;           // finite-difference probe size
  double alpha0 = 0.2;          // initial step, halved/grown by backtracking
  // Walk each data-seeded ray in steps of this size before bisecting.
  // Doubling alone can hop over a thin sliver of the opposite class and
  // lock onto a far boundary instead; the linear scan catches slivers
  // wider than scan_step. 0 falls back to plain doubling.
  double scan_step = 0.005;
  // Independent descents from reshuffled starting directions, best kept.
  // The descent is local, so fresh starts beat spending the same budget
  // pushing one run further into its basin.
  int restarts = 4;
  const Dataset* init_data = nullptr;
};

// Query-only boundary attack: treats the distance-along-direction function
// as the objective and descends it with random-gradient-free steps.
AttackResult cheng_attack_linf(const Ensemble& model, std::span<const double> x,
                               int y, const ChengParams& params);

// The axis-aligned cells induced by every threshold in the model. All
// points of one cell share a prediction.
struct CellGrid {
  std::vector<std::vector<double>> thresholds;  // per feature, sorted unique
  double cell_count() const;
};

CellGrid build_cell_grid(const Ensemble& model, std::size_t feature_count);

inline constexpr double kCellGuard = 1e7;

// Raised instead of attempting an enumeration that would exceed kCellGuard.
class CellGuardExceeded : public std::runtime_error {
public:
  explicit CellGuardExceeded(const std::string& what)
      : std::runtime_error(what) {}
};

// Provably minimal l-inf adversarial distance by enumerating every cell of
// the model's threshold grid. Witnesses sit delta=1e-9 inside open cell
// boundaries. Only viable for small models; guarded by kCellGuard.
AttackResult exact_attack_small(const Ensemble& model,
                                std::span<const double> x, int y);

enum class AttackKind { papernot, boundary, exact };

std::string attack_name(AttackKind k);
AttackKind attack_from_name(const std::string& name);

struct EvalOptions {
  AttackKind attack = AttackKind::boundary;
  std::int64_t budget = 20000;
  unsigned seed = 0;
  int threads = 1;
  const Dataset* train = nullptr;  // init directions for the boundary attack
};

struct ExampleReport {
  int example_id = 0;
  int true_label = 0;
  int pred_label = 0;
  bool attacked = false;
  AttackResult result;
};

struct EvalReport {
  std::size_t total = 0;
  std::size_t correct = 0;
  std::size_t attacked = 0;
  std::size_t successes = 0;
  double accuracy = 0.0;
  double success_rate = 0.0;  // successes / attacked, 0 when none attacked
  double avg_linf = 0.0;      // averages over successful attacks
  double avg_l1 = 0.0;
  double avg_l2 = 0.0;
  std::vector<ExampleReport> rows;
};

// Attacks every correctly classified test example. Per-example seeds are
// derived from the base seed and the example index, so results do not
// depend on the thread count.
EvalReport evaluate_robustness(const Ensemble& model, const Dataset& test,
                               const EvalOptions& opt);

void write_eval_csv(const EvalReport& report, AttackKind attack,
                    const std::string& path);

// Fraction of examples whose prediction stays correct on the whole
// eps-box around them, decided by enumerating the reachable grid cells.
// Same enumeration guard as the exact attack.
double worst_case_accuracy(const Ensemble& model, const Dataset& test,
                           const RobustConfig& cfg);

}  // namespace rtree
