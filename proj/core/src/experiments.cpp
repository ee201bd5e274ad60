#include "pcsm/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <mutex>
#include <numeric>
#include <thread>

#include "pcsm/common.hpp"
#include "pcsm/saliency.hpp"

namespace pcsm {

std::size_t worker_count() {
  if (const char* env = std::getenv("PCSM_THREADS")) {
    const long v = std::atol(env);
    if (v >= 1) return static_cast<std::size_t>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min(count, worker_count());
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::exception_ptr error;
  std::mutex error_mutex;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < count; i += workers) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (std::thread& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

EvalSummary evaluate_clean(const ModelParams& model, const Dataset& dataset) {
  if (dataset.items.empty()) {
    throw StructuralError("evaluate: empty dataset");
  }
  std::vector<double> losses(dataset.items.size());
  std::vector<char> correct(dataset.items.size());
  parallel_for(dataset.items.size(), [&](std::size_t i) {
    const LabeledCloud& item = dataset.items[i];
    losses[i] = loss(model, item.cloud, item.label);
    correct[i] = forward(model, item.cloud).predicted_class == item.label;
  });
  EvalSummary s;
  for (std::size_t i = 0; i < dataset.items.size(); ++i) {
    s.mean_loss += losses[i];
    s.accuracy += correct[i] ? 1.0 : 0.0;
  }
  s.mean_loss /= static_cast<double>(dataset.items.size());
  s.accuracy /= static_cast<double>(dataset.items.size());
  return s;
}

DropPlan default_drop_plan(DropScheme scheme, std::size_t n) {
  DropPlan plan;
  if (n == 0) {
    plan.points = 0;
    plan.iterations = 0;
    return plan;
  }
  if (scheme == DropScheme::high || scheme == DropScheme::critical) {
    const std::size_t t = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(static_cast<double>(n) / 5.0)));
    plan.iterations = t;
    plan.points = (n / t) * t;
  } else {
    plan.iterations = 1;
    plan.points = n;
  }
  return plan;
}

EvalSummary evaluate_dropped(const ModelParams& model, const Dataset& dataset,
                             DropScheme scheme, const DropPlan& plan,
                             double alpha, std::uint64_t seed) {
  if (plan.points == 0) return evaluate_clean(model, dataset);
  std::vector<double> losses(dataset.items.size());
  std::vector<char> correct(dataset.items.size());
  parallel_for(dataset.items.size(), [&](std::size_t i) {
    const LabeledCloud& item = dataset.items[i];
    DropConfig config;
    config.scheme = scheme;
    config.n = plan.points;
    config.T = plan.iterations;
    config.alpha = alpha;
    config.seed = Rng::mix(seed, i);
    const DropResult r = run_drop(model, item.cloud, item.label, config);
    losses[i] = r.losses.back();
    correct[i] = r.predictions.back() == item.label;
  });
  EvalSummary s;
  for (std::size_t i = 0; i < dataset.items.size(); ++i) {
    s.mean_loss += losses[i];
    s.accuracy += correct[i] ? 1.0 : 0.0;
  }
  s.mean_loss /= static_cast<double>(dataset.items.size());
  s.accuracy /= static_cast<double>(dataset.items.size());
  return s;
}

EvalSummary evaluate_negative_drop(const ModelParams& model,
                                   const Dataset& dataset, double alpha) {
  std::vector<double> losses(dataset.items.size());
  std::vector<char> correct(dataset.items.size());
  SaliencyConfig sal;
  sal.alpha = alpha;
  parallel_for(dataset.items.size(), [&](std::size_t i) {
    const LabeledCloud& item = dataset.items[i];
    const SaliencyMap map = saliency_scores(model, item.cloud, item.label, sal);
    std::vector<std::size_t> negatives;
    for (std::size_t p = 0; p < map.scores.size(); ++p) {
      if (map.scores[p] < 0.0) negatives.push_back(p);
    }
    Cloud remaining = item.cloud;
    if (!negatives.empty()) {
      if (negatives.size() == item.cloud.size()) {
        // Keep the single best-scoring point so the cloud stays non-empty.
        std::size_t best = 0;
        for (std::size_t p = 1; p < map.scores.size(); ++p) {
          if (map.scores[p] > map.scores[best]) best = p;
        }
        negatives.erase(std::find(negatives.begin(), negatives.end(), best));
      }
      remaining = drop_points(item.cloud, negatives).first;
    }
    losses[i] = loss(model, remaining, item.label);
    correct[i] = forward(model, remaining).predicted_class == item.label;
  });
  EvalSummary s;
  for (std::size_t i = 0; i < dataset.items.size(); ++i) {
    s.mean_loss += losses[i];
    s.accuracy += correct[i] ? 1.0 : 0.0;
  }
  s.mean_loss /= static_cast<double>(dataset.items.size());
  s.accuracy /= static_cast<double>(dataset.items.size());
  return s;
}

std::vector<RobustnessCurve> robustness_curves(const ModelParams& model,
                                               const Dataset& dataset,
                                               const CurveOptions& options) {
  for (std::size_t n : options.grid) {
    for (const LabeledCloud& item : dataset.items) {
      if (n >= item.cloud.size()) {
        throw StructuralError("curve: grid value must be below the cloud size");
      }
    }
  }
  if (!std::is_sorted(options.grid.begin(), options.grid.end()) ||
      std::adjacent_find(options.grid.begin(), options.grid.end()) !=
          options.grid.end()) {
    throw StructuralError("curve: grid must be strictly increasing");
  }
  std::vector<RobustnessCurve> curves;
  for (DropScheme scheme : options.schemes) {
    RobustnessCurve curve;
    curve.scheme = scheme;
    for (std::size_t n : options.grid) {
      DropPlan plan = default_drop_plan(scheme, n);
      if (options.iterations_override && n > 0) {
        plan.iterations = *options.iterations_override;
        plan.points = (n / plan.iterations) * plan.iterations;
      }
      const EvalSummary s =
          evaluate_dropped(model, dataset, scheme, plan, options.alpha,
                           options.seed);
      curve.rows.push_back(
          {plan.points, plan.iterations, s.accuracy, s.mean_loss});
    }
    curves.push_back(std::move(curve));
  }
  return curves;
}

std::vector<std::size_t> select_points(const ModelParams& model,
                                       const Cloud& cloud, int label,
                                       DropScheme scheme, std::size_t n,
                                       std::uint64_t seed, double alpha) {
  if (n > cloud.size()) {
    throw StructuralError("select_points: n exceeds cloud size");
  }
  if (n == 0) return {};
  std::vector<std::size_t> order(cloud.size());
  std::iota(order.begin(), order.end(), 0);
  auto sort_by = [&](const std::vector<double>& key, bool descending) {
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (key[a] != key[b]) {
        return descending ? key[a] > key[b] : key[a] < key[b];
      }
      return a < b;
    });
  };
  switch (scheme) {
    case DropScheme::high:
    case DropScheme::low: {
      SaliencyConfig sal;
      sal.alpha = alpha;
      const SaliencyMap map = saliency_scores(model, cloud, label, sal);
      sort_by(map.scores, scheme == DropScheme::high);
      break;
    }
    case DropScheme::critical: {
      const CriticalCounts cc = critical_counts(model, cloud);
      std::vector<double> key(cc.counts.begin(), cc.counts.end());
      sort_by(key, true);
      break;
    }
    case DropScheme::furthest: {
      const Point core = spherical_core(cloud);
      std::vector<double> dist(cloud.size());
      for (std::size_t i = 0; i < cloud.size(); ++i) {
        const Point& p = cloud.points[i];
        const double dx = p[0] - core[0], dy = p[1] - core[1], dz = p[2] - core[2];
        dist[i] = std::sqrt(dx * dx + dy * dy + dz * dz);
      }
      sort_by(dist, true);
      break;
    }
    case DropScheme::random: {
      Rng rng(seed);
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = i + rng.uniform_index(order.size() - i);
        std::swap(order[i], order[j]);
      }
      break;
    }
  }
  order.resize(n);
  return order;
}

ConsistencyReport shift_drop_consistency(const ModelParams& model,
                                         const Dataset& dataset, std::size_t n,
                                         const std::vector<DropScheme>& schemes,
                                         std::uint64_t seed, double alpha) {
  for (const LabeledCloud& item : dataset.items) {
    if (n >= item.cloud.size()) {
      throw StructuralError("consistency: n must be below the cloud size");
    }
  }
  ConsistencyReport report;
  report.n = n;
  report.pair_count = dataset.items.size();
  for (DropScheme scheme : schemes) {
    std::vector<char> agree(dataset.items.size());
    parallel_for(dataset.items.size(), [&](std::size_t i) {
      const LabeledCloud& item = dataset.items[i];
      const std::vector<std::size_t> sel = select_points(
          model, item.cloud, item.label, scheme, n, Rng::mix(seed, i), alpha);
      if (sel.empty()) {
        agree[i] = 1;
        return;
      }
      const Cloud dropped = drop_points(item.cloud, sel).first;
      const Cloud shifted =
          shift_to_center(item.cloud, sel, spherical_core(item.cloud));
      agree[i] = forward(model, dropped).predicted_class ==
                 forward(model, shifted).predicted_class;
    });
    double fraction = 0.0;
    for (char a : agree) fraction += a ? 1.0 : 0.0;
    fraction /= static_cast<double>(dataset.items.size());
    report.agreements.push_back({scheme, fraction});
  }
  return report;
}

GeneralizationReport generalization(const ModelParams& attacker,
                                    const ModelParams& victim,
                                    const Dataset& dataset, std::size_t n,
                                    std::uint64_t seed, double alpha) {
  if (attacker.class_count() != victim.class_count()) {
    throw FormatError("generalization: checkpoints disagree on class count");
  }
  GeneralizationReport report;
  report.plan = default_drop_plan(DropScheme::high, n);
  report.clean = evaluate_clean(victim, dataset);
  report.rand_baseline = evaluate_dropped(
      victim, dataset, DropScheme::random,
      DropPlan{report.plan.points, 1}, alpha, seed);

  std::vector<double> losses(dataset.items.size());
  std::vector<char> correct(dataset.items.size());
  parallel_for(dataset.items.size(), [&](std::size_t i) {
    const LabeledCloud& item = dataset.items[i];
    DropConfig config;
    config.scheme = DropScheme::high;
    config.n = report.plan.points;
    config.T = report.plan.iterations;
    config.alpha = alpha;
    const DropResult r = saliency_drop(attacker, item.cloud, item.label, config);
    losses[i] = loss(victim, r.remaining, item.label);
    correct[i] = forward(victim, r.remaining).predicted_class == item.label;
  });
  for (std::size_t i = 0; i < dataset.items.size(); ++i) {
    report.transfer_high.mean_loss += losses[i];
    report.transfer_high.accuracy += correct[i] ? 1.0 : 0.0;
  }
  report.transfer_high.mean_loss /= static_cast<double>(dataset.items.size());
  report.transfer_high.accuracy /= static_cast<double>(dataset.items.size());
  return report;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) {
    throw StructuralError("spearman: length mismatch");
  }
  if (a.size() < 2) {
    throw StructuralError("spearman: need at least two samples");
  }
  auto average_ranks = [](const std::vector<double>& v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t x, std::size_t y) { return v[x] < v[y]; });
    std::vector<double> ranks(v.size());
    std::size_t run = 0;
    while (run < order.size()) {
      std::size_t end = run;
      while (end + 1 < order.size() && v[order[end + 1]] == v[order[run]]) ++end;
      const double avg = 0.5 * static_cast<double>(run + end);
      for (std::size_t k = run; k <= end; ++k) ranks[order[k]] = avg;
      run = end + 1;
    }
    return ranks;
  };
  const std::vector<double> ra = average_ranks(a);
  const std::vector<double> rb = average_ranks(b);
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += ra[i];
    mb += rb[i];
  }
  ma /= n;
  mb /= n;
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = ra[i] - ma;
    const double db = rb[i] - mb;
    cov += da * db;
    va += da * da;
    vb += db * db;
  }
  if (va == 0.0 || vb == 0.0) return 0.0;
  return cov / std::sqrt(va * vb);
}

}  // namespace pcsm
