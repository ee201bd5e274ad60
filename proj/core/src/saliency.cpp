#include "pcsm/saliency.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "pcsm/common.hpp"

namespace pcsm {

Point spherical_core(const Cloud& cloud) {
  if (cloud.empty()) {
    throw StructuralError("spherical_core: empty cloud");
  }
  const std::size_t n = cloud.size();
  Point core;
  std::vector<double> axis(n);
  for (std::size_t j = 0; j < 3; ++j) {
    for (std::size_t i = 0; i < n; ++i) axis[i] = cloud.points[i][j];
    std::sort(axis.begin(), axis.end());
    core[j] = (n % 2 == 1) ? axis[n / 2]
                           : 0.5 * (axis[n / 2 - 1] + axis[n / 2]);
  }
  return core;
}

std::vector<double> radial_gradient(const Cloud& cloud,
                                    const std::vector<Point>& coordinate_gradients,
                                    const Point& core, double epsilon_r) {
  if (coordinate_gradients.size() != cloud.size()) {
    throw StructuralError("radial_gradient: gradient count does not match cloud");
  }
  std::vector<double> out(cloud.size(), 0.0);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Point& p = cloud.points[i];
    const Point& g = coordinate_gradients[i];
    const double dx = p[0] - core[0];
    const double dy = p[1] - core[1];
    const double dz = p[2] - core[2];
    const double r = std::sqrt(dx * dx + dy * dy + dz * dz);
    if (r < epsilon_r) continue;  // a point at the core has no radial direction
    out[i] = (g[0] * dx + g[1] * dy + g[2] * dz) / r;
  }
  return out;
}

SaliencyMap saliency_scores(const ModelParams& model, const Cloud& cloud,
                            int label, const SaliencyConfig& config) {
  if (!(config.alpha > 0.0)) {
    throw StructuralError("saliency: alpha must be positive");
  }
  if (!(config.epsilon_r > 0.0)) {
    throw StructuralError("saliency: epsilon_r must be positive");
  }
  const LossGradients grads = loss_with_input_gradient(model, cloud, label);
  SaliencyMap map;
  map.alpha = config.alpha;
  map.core = spherical_core(cloud);
  const std::vector<double> rg =
      radial_gradient(cloud, grads.input_gradient, map.core, config.epsilon_r);
  map.scores.resize(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Point& p = cloud.points[i];
    const double dx = p[0] - map.core[0];
    const double dy = p[1] - map.core[1];
    const double dz = p[2] - map.core[2];
    const double r = std::sqrt(dx * dx + dy * dy + dz * dz);
    map.scores[i] = -rg[i] * std::pow(r, 1.0 + config.alpha);
  }
  return map;
}

Cloud shift_to_center(const Cloud& cloud, const std::vector<std::size_t>& indices,
                      const Point& core) {
  std::vector<bool> seen(cloud.size(), false);
  for (std::size_t idx : indices) {
    if (idx >= cloud.size()) {
      throw StructuralError("shift_to_center: index out of range");
    }
    if (seen[idx]) {
      throw StructuralError("shift_to_center: duplicate index");
    }
    seen[idx] = true;
  }
  Cloud out = cloud;
  for (std::size_t idx : indices) out.points[idx] = core;
  return out;
}

SphericalCoords to_spherical(const Point& point, const Point& core, double alpha) {
  SphericalCoords c;
  const double dx = point[0] - core[0];
  const double dy = point[1] - core[1];
  const double dz = point[2] - core[2];
  c.r = std::sqrt(dx * dx + dy * dy + dz * dz);
  c.psi = std::atan2(std::sqrt(dx * dx + dy * dy), dz);
  c.phi = std::atan2(dy, dx);
  c.rho = c.r > 0.0 ? std::pow(c.r, -alpha)
                    : std::numeric_limits<double>::infinity();
  return c;
}

Point from_spherical(const SphericalCoords& coords, const Point& core) {
  const double sp = std::sin(coords.psi);
  return {core[0] + coords.r * sp * std::cos(coords.phi),
          core[1] + coords.r * sp * std::sin(coords.phi),
          core[2] + coords.r * std::cos(coords.psi)};
}

std::vector<std::size_t> saliency_ranks(const std::vector<double>& scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });
  std::vector<std::size_t> ranks(scores.size());
  for (std::size_t pos = 0; pos < order.size(); ++pos) ranks[order[pos]] = pos;
  return ranks;
}

void write_saliency_csv(const Cloud& cloud, const SaliencyMap& map,
                        const std::filesystem::path& path,
                        std::string_view metadata) {
  if (map.scores.size() != cloud.size()) {
    throw StructuralError("saliency csv: map length does not match cloud");
  }
  const std::vector<std::size_t> ranks = saliency_ranks(map.scores);
  std::string out;
  if (!metadata.empty()) {
    out += "# ";
    out += metadata;
    out += "\n";
  }
  out += "index,x,y,z,r,score,rank\n";
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Point& p = cloud.points[i];
    const double dx = p[0] - map.core[0];
    const double dy = p[1] - map.core[1];
    const double dz = p[2] - map.core[2];
    const double r = std::sqrt(dx * dx + dy * dy + dz * dz);
    out += std::to_string(i);
    out += ',';
    out += format_double(p[0]);
    out += ',';
    out += format_double(p[1]);
    out += ',';
    out += format_double(p[2]);
    out += ',';
    out += format_double(r);
    out += ',';
    out += format_double(map.scores[i]);
    out += ',';
    out += std::to_string(ranks[i]);
    out += '\n';
  }
  atomic_write_file(path, out);
}

}  // namespace pcsm
