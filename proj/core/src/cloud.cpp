#include "pcsm/cloud.hpp"

#include <cmath>

#include "pcsm/common.hpp"

namespace pcsm {

Cloud normalize_unit_sphere(const Cloud& cloud) {
  if (cloud.empty()) {
    throw StructuralError("normalize: empty cloud");
  }
  Point centroid = {0.0, 0.0, 0.0};
  for (const Point& p : cloud.points) {
    centroid[0] += p[0];
    centroid[1] += p[1];
    centroid[2] += p[2];
  }
  const double inv_n = 1.0 / static_cast<double>(cloud.size());
  centroid[0] *= inv_n;
  centroid[1] *= inv_n;
  centroid[2] *= inv_n;

  Cloud out;
  out.points.reserve(cloud.size());
  double max_r = 0.0;
  for (const Point& p : cloud.points) {
    const Point q = {p[0] - centroid[0], p[1] - centroid[1], p[2] - centroid[2]};
    max_r = std::max(max_r, std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2]));
    out.points.push_back(q);
  }
  if (max_r > 0.0) {
    const double inv_r = 1.0 / max_r;
    for (Point& p : out.points) {
      p[0] *= inv_r;
      p[1] *= inv_r;
      p[2] *= inv_r;
    }
  }
  return out;
}

}  // namespace pcsm
