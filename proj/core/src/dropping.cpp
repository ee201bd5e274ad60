#include "pcsm/dropping.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pcsm/common.hpp"
#include "pcsm/saliency.hpp"

namespace pcsm {

const char* scheme_name(DropScheme scheme) {
  switch (scheme) {
    case DropScheme::high: return "high";
    case DropScheme::low: return "low";
    case DropScheme::random: return "random";
    case DropScheme::critical: return "critical";
    case DropScheme::furthest: return "furthest";
  }
  return "?";
}

DropScheme scheme_from_name(const std::string& name) {
  if (name == "high") return DropScheme::high;
  if (name == "low") return DropScheme::low;
  if (name == "random") return DropScheme::random;
  if (name == "critical") return DropScheme::critical;
  if (name == "furthest") return DropScheme::furthest;
  throw StructuralError("unknown drop scheme: " + name);
}

namespace {

void validate_config(const DropConfig& config, std::size_t cloud_size) {
  if (config.n < 1 || config.n >= cloud_size) {
    throw StructuralError("drop: need 1 <= n < N");
  }
  if (config.T < 1 || config.T > config.n) {
    throw StructuralError("drop: need 1 <= T <= n");
  }
  if (config.n % config.T != 0) {
    throw StructuralError("drop: n must be divisible by T");
  }
}

// Remaining cloud plus the original index of each surviving row.
struct Working {
  Cloud cloud;
  std::vector<std::size_t> orig;

  explicit Working(const Cloud& c) : cloud(c), orig(c.size()) {
    std::iota(orig.begin(), orig.end(), 0);
  }

  // locals: indices into the current cloud, any order.
  void remove(std::vector<std::size_t> locals) {
    std::sort(locals.begin(), locals.end());
    std::vector<bool> gone(cloud.size(), false);
    for (std::size_t i : locals) gone[i] = true;
    Cloud next;
    std::vector<std::size_t> next_orig;
    next.points.reserve(cloud.size() - locals.size());
    next_orig.reserve(cloud.size() - locals.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      if (!gone[i]) {
        next.points.push_back(cloud.points[i]);
        next_orig.push_back(orig[i]);
      }
    }
    cloud = std::move(next);
    orig = std::move(next_orig);
  }
};

// Generic iterative driver: `select` returns local indices to drop from the
// current remaining cloud for one iteration.
template <class Select>
DropResult iterate_drop(const ModelParams& model, const Cloud& cloud, int label,
                        const DropConfig& config, Select select) {
  validate_config(config, cloud.size());
  Working work(cloud);
  DropResult result;
  result.dropped.reserve(config.n);
  for (std::size_t t = 0; t < config.T; ++t) {
    std::vector<std::size_t> locals = select(work, t);
    for (std::size_t i : locals) result.dropped.push_back(work.orig[i]);
    work.remove(std::move(locals));
    result.losses.push_back(loss(model, work.cloud, label));
    result.predictions.push_back(forward(model, work.cloud).predicted_class);
  }
  result.remaining = std::move(work.cloud);
  return result;
}

// First `count` local indices ordered by key descending (or ascending),
// ties broken by lower original index.
std::vector<std::size_t> top_by_key(const std::vector<double>& key,
                                    const std::vector<std::size_t>& orig,
                                    std::size_t count, bool descending) {
  std::vector<std::size_t> locals(key.size());
  std::iota(locals.begin(), locals.end(), 0);
  std::sort(locals.begin(), locals.end(), [&](std::size_t a, std::size_t b) {
    if (key[a] != key[b]) return descending ? key[a] > key[b] : key[a] < key[b];
    return orig[a] < orig[b];
  });
  locals.resize(count);
  return locals;
}

}  // namespace

std::pair<Cloud, std::vector<std::size_t>> drop_points(
    const Cloud& cloud, const std::vector<std::size_t>& indices) {
  if (indices.size() >= cloud.size()) {
    throw StructuralError("drop_points: cannot drop every point");
  }
  std::vector<bool> gone(cloud.size(), false);
  for (std::size_t idx : indices) {
    if (idx >= cloud.size()) {
      throw StructuralError("drop_points: index out of range");
    }
    if (gone[idx]) {
      throw StructuralError("drop_points: duplicate index");
    }
    gone[idx] = true;
  }
  Cloud out;
  out.points.reserve(cloud.size() - indices.size());
  std::vector<std::size_t> mapping(cloud.size(), kDroppedIndex);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (!gone[i]) {
      mapping[i] = out.points.size();
      out.points.push_back(cloud.points[i]);
    }
  }
  return {std::move(out), std::move(mapping)};
}

DropResult saliency_drop(const ModelParams& model, const Cloud& cloud,
                         int label, const DropConfig& config) {
  if (config.scheme != DropScheme::high && config.scheme != DropScheme::low) {
    throw StructuralError("saliency_drop: scheme must be high or low");
  }
  const bool descending = config.scheme == DropScheme::high;
  const std::size_t per_iter = config.n / config.T;
  SaliencyConfig sal;
  sal.alpha = config.alpha;
  return iterate_drop(model, cloud, label, config,
                      [&](const Working& work, std::size_t) {
                        const SaliencyMap map =
                            saliency_scores(model, work.cloud, label, sal);
                        return top_by_key(map.scores, work.orig, per_iter,
                                          descending);
                      });
}

CriticalCounts critical_counts(const ModelParams& model, const Cloud& cloud) {
  const Prediction pred = forward(model, cloud);
  CriticalCounts counts;
  counts.counts.assign(cloud.size(), 0);
  for (std::size_t winner : pred.pool_argmax) {
    counts.counts[winner]++;
  }
  return counts;
}

DropResult critical_drop(const ModelParams& model, const Cloud& cloud,
                         int label, const DropConfig& config) {
  if (config.scheme != DropScheme::critical) {
    throw StructuralError("critical_drop: scheme must be critical");
  }
  const std::size_t per_iter = config.n / config.T;
  return iterate_drop(
      model, cloud, label, config, [&](const Working& work, std::size_t) {
        const CriticalCounts cc = critical_counts(model, work.cloud);
        // Sorting by count descending realises the preference order
        // counts>=2, then ==1, then ==0, each tie-broken by original index.
        std::vector<double> key(cc.counts.begin(), cc.counts.end());
        return top_by_key(key, work.orig, per_iter, true);
      });
}

DropResult rand_drop(const ModelParams& model, const Cloud& cloud, int label,
                     const DropConfig& config) {
  if (config.scheme != DropScheme::random) {
    throw StructuralError("rand_drop: scheme must be random");
  }
  validate_config(config, cloud.size());
  // Partial Fisher-Yates over the original indices: the first n entries are
  // a uniform sample without replacement, in draw order.
  std::vector<std::size_t> pool(cloud.size());
  std::iota(pool.begin(), pool.end(), 0);
  Rng rng(config.seed);
  for (std::size_t i = 0; i < config.n; ++i) {
    const std::size_t j = i + rng.uniform_index(pool.size() - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(config.n);

  const std::size_t per_iter = config.n / config.T;
  std::size_t cursor = 0;
  return iterate_drop(model, cloud, label, config,
                      [&](const Working& work, std::size_t) {
                        std::vector<std::size_t> locals;
                        locals.reserve(per_iter);
                        for (std::size_t k = 0; k < per_iter; ++k) {
                          const std::size_t target = pool[cursor++];
                          for (std::size_t i = 0; i < work.orig.size(); ++i) {
                            if (work.orig[i] == target) {
                              locals.push_back(i);
                              break;
                            }
                          }
                        }
                        return locals;
                      });
}

DropResult furthest_drop(const ModelParams& model, const Cloud& cloud,
                         int label, const DropConfig& config) {
  if (config.scheme != DropScheme::furthest) {
    throw StructuralError("furthest_drop: scheme must be furthest");
  }
  const std::size_t per_iter = config.n / config.T;
  return iterate_drop(model, cloud, label, config,
                      [&](const Working& work, std::size_t) {
                        const Point core = spherical_core(work.cloud);
                        std::vector<double> dist(work.cloud.size());
                        for (std::size_t i = 0; i < work.cloud.size(); ++i) {
                          const Point& p = work.cloud.points[i];
                          const double dx = p[0] - core[0];
                          const double dy = p[1] - core[1];
                          const double dz = p[2] - core[2];
                          dist[i] = std::sqrt(dx * dx + dy * dy + dz * dz);
                        }
                        return top_by_key(dist, work.orig, per_iter, true);
                      });
}

DropResult run_drop(const ModelParams& model, const Cloud& cloud, int label,
                    const DropConfig& config) {
  switch (config.scheme) {
    case DropScheme::high:
    case DropScheme::low:
      return saliency_drop(model, cloud, label, config);
    case DropScheme::critical:
      return critical_drop(model, cloud, label, config);
    case DropScheme::random:
      return rand_drop(model, cloud, label, config);
    case DropScheme::furthest:
      return furthest_drop(model, cloud, label, config);
  }
  throw StructuralError("run_drop: unknown scheme");
}

std::vector<double> brute_force_contribution(const ModelParams& model,
                                             const Cloud& cloud, int label) {
  if (cloud.size() > 4096) {
    throw StructuralError("brute_force_contribution: cloud too large (N > 4096)");
  }
  if (cloud.size() < 2) {
    throw StructuralError("brute_force_contribution: need at least 2 points");
  }
  const double base = loss(model, cloud, label);
  std::vector<double> out(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    auto [reduced, mapping] = drop_points(cloud, {i});
    out[i] = loss(model, reduced, label) - base;
  }
  return out;
}

void write_drop_csv(const DropResult& result, std::size_t per_iteration,
                    const std::filesystem::path& path) {
  if (per_iteration == 0 ||
      result.dropped.size() % per_iteration != 0 ||
      result.dropped.size() / per_iteration != result.losses.size() ||
      result.losses.size() != result.predictions.size()) {
    throw StructuralError("drop csv: inconsistent result record");
  }
  std::string out = "iteration,dropped_original_indices,loss,predicted_class\n";
  for (std::size_t t = 0; t < result.losses.size(); ++t) {
    out += std::to_string(t);
    out += ',';
    for (std::size_t k = 0; k < per_iteration; ++k) {
      if (k) out += ';';
      out += std::to_string(result.dropped[t * per_iteration + k]);
    }
    out += ',';
    out += format_double(result.losses[t]);
    out += ',';
    out += std::to_string(result.predictions[t]);
    out += '\n';
  }
  atomic_write_file(path, out);
}

}  // namespace pcsm
