#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "pcsm/tensor.hpp"

namespace pcsm {

using Point = std::array<double, 3>;

// Unordered set of 3D points; stored order is only used for indexing.
struct Cloud {
  std::vector<Point> points;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

struct LabeledCloud {
  Cloud cloud;
  int label = 0;
  std::string source_id;
};

struct Dataset {
  std::vector<LabeledCloud> items;
  int class_count = 0;

  std::size_t size() const { return items.size(); }
};

inline Tensor cloud_to_tensor(const Cloud& cloud) {
  Tensor t({cloud.size(), 3});
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    t.at(i, 0) = cloud.points[i][0];
    t.at(i, 1) = cloud.points[i][1];
    t.at(i, 2) = cloud.points[i][2];
  }
  return t;
}

// Centers the cloud on its mean and scales so the farthest point sits on the
// unit sphere. A cloud whose points all coincide is only centered.
Cloud normalize_unit_sphere(const Cloud& cloud);

}  // namespace pcsm
