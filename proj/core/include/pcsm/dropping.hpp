#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "pcsm/cloud.hpp"
#include "pcsm/model.hpp"

namespace pcsm {

enum class DropScheme { high, low, random, critical, furthest };

const char* scheme_name(DropScheme scheme);
DropScheme scheme_from_name(const std::string& name);

struct DropConfig {
  DropScheme scheme = DropScheme::high;
  std::size_t n = 0;      // total points to drop
  std::size_t T = 1;      // iterations; n/T dropped per iteration
  double alpha = 1.0;     // saliency exponent (high/low schemes)
  std::uint64_t seed = 0; // random scheme only
};

struct DropResult {
  Cloud remaining;
  // Indices into the original cloud, in drop order.
  std::vector<std::size_t> dropped;
  // Loss and predicted class of the remaining cloud after each iteration.
  std::vector<double> losses;
  std::vector<int> predictions;
};

// How many pooled feature dimensions each point wins.
struct CriticalCounts {
  std::vector<std::size_t> counts;
};

inline constexpr std::size_t kDroppedIndex = static_cast<std::size_t>(-1);

// Removes the given rows; survivors keep their relative order. The second
// element maps old index -> new index, kDroppedIndex for removed rows.
std::pair<Cloud, std::vector<std::size_t>> drop_points(
    const Cloud& cloud, const std::vector<std::size_t>& indices);

// Iterative saliency-guided dropping: per iteration, recompute the saliency
// map of the remaining cloud and remove the n/T points with the highest
// (scheme=high) or lowest (scheme=low) scores. Ties to lower original index.
DropResult saliency_drop(const ModelParams& model, const Cloud& cloud,
                         int label, const DropConfig& config);

CriticalCounts critical_counts(const ModelParams& model, const Cloud& cloud);

// Iterative critical-subset dropping: per iteration, remove the n/T points
// winning the most pooled features, considering points with counts >= 2
// first, then counts == 1, then counts == 0 by lowest original index.
DropResult critical_drop(const ModelParams& model, const Cloud& cloud,
                         int label, const DropConfig& config);

// n distinct indices drawn uniformly without replacement; deterministic per
// seed. The model enters only to record per-iteration losses/predictions.
DropResult rand_drop(const ModelParams& model, const Cloud& cloud, int label,
                     const DropConfig& config);

// Repeatedly removes the point farthest from the spherical core; the core is
// recomputed every n/T drops.
DropResult furthest_drop(const ModelParams& model, const Cloud& cloud,
                         int label, const DropConfig& config);

DropResult run_drop(const ModelParams& model, const Cloud& cloud, int label,
                    const DropConfig& config);

// Exact leave-one-out contribution: entry i = L(X without x_i) - L(X).
// Guarded to N <= 4096 (N+1 forward passes).
std::vector<double> brute_force_contribution(const ModelParams& model,
                                             const Cloud& cloud, int label);

// CSV export: header "iteration,dropped_original_indices,loss,predicted_class"
// with the iteration's indices semicolon-joined.
void write_drop_csv(const DropResult& result, std::size_t per_iteration,
                    const std::filesystem::path& path);

}  // namespace pcsm
