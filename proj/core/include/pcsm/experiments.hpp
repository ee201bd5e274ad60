#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "pcsm/dropping.hpp"
#include "pcsm/model.hpp"

namespace pcsm {

// Runs fn(0..count-1) on up to PCSM_THREADS workers (hardware concurrency by
// default). Callers must make iterations independent; aggregate by index
// afterwards so results do not depend on scheduling.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn);
std::size_t worker_count();

struct EvalSummary {
  double accuracy = 0.0;
  double mean_loss = 0.0;
};

EvalSummary evaluate_clean(const ModelParams& model, const Dataset& dataset);

// Iteration plan for a drop budget: how many points actually drop and in how
// many batches.
struct DropPlan {
  std::size_t points = 0;
  std::size_t iterations = 1;
};

// Default protocol: saliency- and critical-guided schemes drop 5 points per
// iteration (budgets not divisible by 5 are rounded down to keep the batches
// equal); the one-shot schemes use a single iteration.
DropPlan default_drop_plan(DropScheme scheme, std::size_t n);

// Accuracy and mean loss over the dataset after dropping per `plan` with the
// given scheme. The random scheme derives one sub-seed per cloud, so results
// are identical no matter how work is scheduled.
EvalSummary evaluate_dropped(const ModelParams& model, const Dataset& dataset,
                             DropScheme scheme, const DropPlan& plan,
                             double alpha, std::uint64_t seed);

// Drops every point with a negative saliency score (one-shot, per cloud); at
// least one point is always kept.
EvalSummary evaluate_negative_drop(const ModelParams& model,
                                   const Dataset& dataset, double alpha);

struct CurveRow {
  std::size_t points_dropped = 0;
  std::size_t iterations = 0;
  double accuracy = 0.0;
  double mean_loss = 0.0;
};

struct RobustnessCurve {
  DropScheme scheme = DropScheme::high;
  std::vector<CurveRow> rows;
};

struct CurveOptions {
  std::vector<DropScheme> schemes = {DropScheme::high, DropScheme::low,
                                     DropScheme::random, DropScheme::critical,
                                     DropScheme::furthest};
  std::vector<std::size_t> grid = {0, 10, 20, 30, 40, 50};
  double alpha = 1.0;
  std::uint64_t seed = 0;
  std::optional<std::size_t> iterations_override;
};

// One curve per scheme over the drop grid. Grid value 0 reproduces the clean
// baseline exactly.
std::vector<RobustnessCurve> robustness_curves(const ModelParams& model,
                                               const Dataset& dataset,
                                               const CurveOptions& options);

// One-shot point selection (no iterative refinement), as used by the
// shift-vs-drop experiment.
std::vector<std::size_t> select_points(const ModelParams& model,
                                       const Cloud& cloud, int label,
                                       DropScheme scheme, std::size_t n,
                                       std::uint64_t seed, double alpha);

struct SchemeAgreement {
  DropScheme scheme = DropScheme::high;
  double agreement = 0.0;
};

struct ConsistencyReport {
  std::vector<SchemeAgreement> agreements;
  std::size_t n = 0;
  std::size_t pair_count = 0;
};

// For every test cloud and scheme, removes n selected points in one variant
// and shifts the same points onto the spherical core in the other, then
// reports the fraction of clouds whose two predictions agree.
ConsistencyReport shift_drop_consistency(const ModelParams& model,
                                         const Dataset& dataset, std::size_t n,
                                         const std::vector<DropScheme>& schemes,
                                         std::uint64_t seed, double alpha = 1.0);

struct GeneralizationReport {
  EvalSummary clean;          // victim on untouched clouds
  EvalSummary transfer_high;  // victim on attacker's high-drop subsets
  EvalSummary rand_baseline;  // victim on randomly dropped clouds
  DropPlan plan;
};

// High-drop subsets are computed against `attacker` and evaluated under
// `victim`. Both models must share the class count.
GeneralizationReport generalization(const ModelParams& attacker,
                                    const ModelParams& victim,
                                    const Dataset& dataset, std::size_t n,
                                    std::uint64_t seed, double alpha = 1.0);

// Spearman rank correlation with average ranks on ties; 0 when either side
// has zero rank variance.
double spearman(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace pcsm
