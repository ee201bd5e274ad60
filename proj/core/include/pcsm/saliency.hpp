#pragma once

#include <filesystem>
#include <string_view>
#include <vector>

#include "pcsm/cloud.hpp"
#include "pcsm/model.hpp"

namespace pcsm {

struct SaliencyConfig {
  double alpha = 1.0;       // radius rescaling exponent
  double epsilon_r = 1e-10; // radius floor below which a point scores zero
};

// Point position relative to the spherical core. psi is the polar angle from
// the +z axis, phi the azimuth; rho = r^(-alpha) is the rescaled radius
// (infinite at the core).
struct SphericalCoords {
  double r = 0.0;
  double psi = 0.0;
  double phi = 0.0;
  double rho = 0.0;
};

struct SaliencyMap {
  std::vector<double> scores;  // aligned with cloud point indices
  double alpha = 1.0;
  Point core = {0.0, 0.0, 0.0};
};

// Per-axis median of the cloud's coordinates; for an even count, the mean of
// the two middle values.
Point spherical_core(const Cloud& cloud);

// dL/dr_i from the orthogonal-coordinate gradients:
//   sum_j (dL/dx_ij) (x_ij - c_j) / r_i,   zero when r_i < epsilon_r.
std::vector<double> radial_gradient(const Cloud& cloud,
                                    const std::vector<Point>& coordinate_gradients,
                                    const Point& core, double epsilon_r = 1e-10);

// Saliency score s_i = -(dL/dr_i) * r_i^(1+alpha), computed from a single
// forward+backward pass. The map records alpha and the core it used.
SaliencyMap saliency_scores(const ModelParams& model, const Cloud& cloud,
                            int label, const SaliencyConfig& config = {});

// Relocates the selected points exactly onto the core; the rest untouched.
Cloud shift_to_center(const Cloud& cloud, const std::vector<std::size_t>& indices,
                      const Point& core);

SphericalCoords to_spherical(const Point& point, const Point& core, double alpha);
Point from_spherical(const SphericalCoords& coords, const Point& core);

// Dense ranks: result[i] is the rank of point i, 0 = highest score, ties
// broken by lower index.
std::vector<std::size_t> saliency_ranks(const std::vector<double>& scores);

// CSV export: header "index,x,y,z,r,score,rank"; values use shortest
// round-trip formatting. A non-empty metadata string is emitted first as a
// single "# ..." comment line.
void write_saliency_csv(const Cloud& cloud, const SaliencyMap& map,
                        const std::filesystem::path& path,
                        std::string_view metadata = {});

}  // namespace pcsm
