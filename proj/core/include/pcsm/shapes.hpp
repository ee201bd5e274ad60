#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pcsm/cloud.hpp"

namespace pcsm {

// Eight surface primitives used as desk-scale stand-ins for scanned objects.
// The enum order fixes the label assignment.
enum class ShapeClass {
  sphere = 0,
  cube,
  cylinder,
  cone,
  torus,
  pyramid,
  cross_planes,
  helix,
};

inline constexpr int kShapeClassCount = 8;

const char* shape_class_name(ShapeClass c);
const std::vector<std::string>& shape_class_names();

struct ShapeSpec {
  std::size_t points_per_cloud = 256;
  std::size_t train_per_class = 200;
  std::size_t test_per_class = 50;
  double jitter_sigma = 0.01;
  std::uint64_t seed = 1;
};

struct SyntheticData {
  Dataset train;
  Dataset test;
};

// Samples each primitive's surface uniformly, adds Gaussian jitter, and
// normalizes to the unit sphere. Fully deterministic in the seed; the train
// and test splits draw from disjoint substreams.
SyntheticData generate_shapes(const ShapeSpec& spec);

// One cloud of the given class, for tests and tooling.
Cloud sample_shape(ShapeClass c, std::size_t points, double jitter_sigma,
                   std::uint64_t seed);

}  // namespace pcsm
