#include "pcsm/shapes.hpp"

#include <cmath>

#include "pcsm/common.hpp"

namespace pcsm {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

Point sphere_point(Rng& rng) {
  const double z = rng.uniform(-1.0, 1.0);
  const double theta = rng.uniform(0.0, kTwoPi);
  const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
  return {s * std::cos(theta), s * std::sin(theta), z};
}

Point cube_point(Rng& rng) {
  const std::size_t face = rng.uniform_index(6);
  const double u = rng.uniform(-1.0, 1.0);
  const double v = rng.uniform(-1.0, 1.0);
  const double w = (face % 2 == 0) ? -1.0 : 1.0;
  switch (face / 2) {
    case 0: return {w, u, v};
    case 1: return {u, w, v};
    default: return {u, v, w};
  }
}

Point cylinder_point(Rng& rng) {
  const double radius = 0.6, half_height = 1.0;
  const double lateral = kTwoPi * radius * 2.0 * half_height;
  const double caps = 2.0 * (kTwoPi / 2.0) * radius * radius;
  const double theta = rng.uniform(0.0, kTwoPi);
  if (rng.uniform01() < lateral / (lateral + caps)) {
    return {radius * std::cos(theta), radius * std::sin(theta),
            rng.uniform(-half_height, half_height)};
  }
  const double rho = radius * std::sqrt(rng.uniform01());
  const double z = rng.uniform01() < 0.5 ? -half_height : half_height;
  return {rho * std::cos(theta), rho * std::sin(theta), z};
}

Point cone_point(Rng& rng) {
  const double radius = 0.8;  // apex (0,0,1), base disk at z = -1
  const double slant = std::sqrt(radius * radius + 4.0);
  const double lateral = (kTwoPi / 2.0) * radius * slant;
  const double base = (kTwoPi / 2.0) * radius * radius;
  const double theta = rng.uniform(0.0, kTwoPi);
  if (rng.uniform01() < lateral / (lateral + base)) {
    const double t = std::sqrt(rng.uniform01());  // area grows with t^2
    const double rho = radius * t;
    return {rho * std::cos(theta), rho * std::sin(theta), 1.0 - 2.0 * t};
  }
  const double rho = radius * std::sqrt(rng.uniform01());
  return {rho * std::cos(theta), rho * std::sin(theta), -1.0};
}

Point torus_point(Rng& rng) {
  const double major = 0.7, minor = 0.25;
  for (;;) {
    const double u = rng.uniform(0.0, kTwoPi);
    const double v = rng.uniform(0.0, kTwoPi);
    // Rejection correction for the surface-area Jacobian.
    if (rng.uniform01() * (major + minor) > major + minor * std::cos(v)) {
      continue;
    }
    const double ring = major + minor * std::cos(v);
    return {ring * std::cos(u), ring * std::sin(u), minor * std::sin(v)};
  }
}

double triangle_area(const Point& a, const Point& b, const Point& c) {
  const double ux = b[0] - a[0], uy = b[1] - a[1], uz = b[2] - a[2];
  const double vx = c[0] - a[0], vy = c[1] - a[1], vz = c[2] - a[2];
  const double cx = uy * vz - uz * vy;
  const double cy = uz * vx - ux * vz;
  const double cz = ux * vy - uy * vx;
  return 0.5 * std::sqrt(cx * cx + cy * cy + cz * cz);
}

Point triangle_point(const Point& a, const Point& b, const Point& c, Rng& rng) {
  double u = rng.uniform01();
  double v = rng.uniform01();
  if (u + v > 1.0) {
    u = 1.0 - u;
    v = 1.0 - v;
  }
  return {a[0] + u * (b[0] - a[0]) + v * (c[0] - a[0]),
          a[1] + u * (b[1] - a[1]) + v * (c[1] - a[1]),
          a[2] + u * (b[2] - a[2]) + v * (c[2] - a[2])};
}

Point pyramid_point(Rng& rng) {
  const Point apex = {0.0, 0.0, 1.0};
  const double h = -0.5, s = 0.7;
  const Point c0 = {-s, -s, h}, c1 = {s, -s, h}, c2 = {s, s, h}, c3 = {-s, s, h};
  // Base as two triangles plus four lateral faces, sampled by area.
  const Point tris[6][3] = {{c0, c1, c2}, {c0, c2, c3}, {c0, c1, apex},
                            {c1, c2, apex}, {c2, c3, apex}, {c3, c0, apex}};
  double areas[6];
  double total = 0.0;
  for (int i = 0; i < 6; ++i) {
    areas[i] = triangle_area(tris[i][0], tris[i][1], tris[i][2]);
    total += areas[i];
  }
  double pick = rng.uniform01() * total;
  int face = 0;
  for (; face < 5; ++face) {
    if (pick < areas[face]) break;
    pick -= areas[face];
  }
  return triangle_point(tris[face][0], tris[face][1], tris[face][2], rng);
}

Point cross_planes_point(Rng& rng) {
  const double u = rng.uniform(-1.0, 1.0);
  const double v = rng.uniform(-1.0, 1.0);
  if (rng.uniform01() < 0.5) {
    return {u, 0.0, v};  // xz plane
  }
  return {0.0, u, v};  // yz plane
}

Point helix_point(Rng& rng) {
  const double turns = 2.5, radius = 0.7;
  const double t = rng.uniform01();  // constant-speed curve: arc-length uniform
  const double angle = kTwoPi * turns * t;
  return {radius * std::cos(angle), radius * std::sin(angle), 2.0 * t - 1.0};
}

Point sample_point(ShapeClass c, Rng& rng) {
  switch (c) {
    case ShapeClass::sphere: return sphere_point(rng);
    case ShapeClass::cube: return cube_point(rng);
    case ShapeClass::cylinder: return cylinder_point(rng);
    case ShapeClass::cone: return cone_point(rng);
    case ShapeClass::torus: return torus_point(rng);
    case ShapeClass::pyramid: return pyramid_point(rng);
    case ShapeClass::cross_planes: return cross_planes_point(rng);
    case ShapeClass::helix: return helix_point(rng);
  }
  throw StructuralError("sample_point: unknown shape class");
}

void validate(const ShapeSpec& spec) {
  if (spec.points_per_cloud < 32) {
    throw StructuralError("shapes: points per cloud must be >= 32");
  }
  if (spec.jitter_sigma < 0.0) {
    throw StructuralError("shapes: jitter sigma must be >= 0");
  }
}

}  // namespace

const char* shape_class_name(ShapeClass c) {
  switch (c) {
    case ShapeClass::sphere: return "sphere";
    case ShapeClass::cube: return "cube";
    case ShapeClass::cylinder: return "cylinder";
    case ShapeClass::cone: return "cone";
    case ShapeClass::torus: return "torus";
    case ShapeClass::pyramid: return "pyramid";
    case ShapeClass::cross_planes: return "cross_planes";
    case ShapeClass::helix: return "helix";
  }
  return "?";
}

const std::vector<std::string>& shape_class_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (int c = 0; c < kShapeClassCount; ++c) {
      v.push_back(shape_class_name(static_cast<ShapeClass>(c)));
    }
    return v;
  }();
  return names;
}

Cloud sample_shape(ShapeClass c, std::size_t points, double jitter_sigma,
                   std::uint64_t seed) {
  Rng rng(seed);
  Cloud cloud;
  cloud.points.reserve(points);
  if (c == ShapeClass::sphere && points >= 3) {
    // Antithetic pairs: uniform per point, and the sample mean coincides
    // with the sphere center, so normalization keeps every point at unit
    // radius. An odd count starts with a zero-sum equilateral triple.
    if (points % 2 == 1) {
      const Point u = sphere_point(rng);
      Point w = sphere_point(rng);
      const double d = u[0] * w[0] + u[1] * w[1] + u[2] * w[2];
      Point v = {w[0] - d * u[0], w[1] - d * u[1], w[2] - d * u[2]};
      const double vn = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
      v = {v[0] / vn, v[1] / vn, v[2] / vn};
      const double s3 = std::sqrt(3.0) / 2.0;
      cloud.points.push_back(u);
      cloud.points.push_back({-0.5 * u[0] + s3 * v[0], -0.5 * u[1] + s3 * v[1],
                              -0.5 * u[2] + s3 * v[2]});
      cloud.points.push_back({-0.5 * u[0] - s3 * v[0], -0.5 * u[1] - s3 * v[1],
                              -0.5 * u[2] - s3 * v[2]});
    }
    while (cloud.points.size() < points) {
      const Point p = sphere_point(rng);
      cloud.points.push_back(p);
      cloud.points.push_back({-p[0], -p[1], -p[2]});
    }
  } else {
    for (std::size_t i = 0; i < points; ++i) {
      cloud.points.push_back(sample_point(c, rng));
    }
  }
  if (jitter_sigma > 0.0) {
    for (Point& p : cloud.points) {
      p[0] += rng.normal(0.0, jitter_sigma);
      p[1] += rng.normal(0.0, jitter_sigma);
      p[2] += rng.normal(0.0, jitter_sigma);
    }
  }
  return normalize_unit_sphere(cloud);
}

SyntheticData generate_shapes(const ShapeSpec& spec) {
  validate(spec);
  SyntheticData data;
  data.train.class_count = kShapeClassCount;
  data.test.class_count = kShapeClassCount;
  for (int split = 0; split < 2; ++split) {
    Dataset& ds = split == 0 ? data.train : data.test;
    const std::size_t per_class =
        split == 0 ? spec.train_per_class : spec.test_per_class;
    for (int c = 0; c < kShapeClassCount; ++c) {
      for (std::size_t i = 0; i < per_class; ++i) {
        const std::uint64_t cloud_seed =
            Rng::mix(spec.seed, static_cast<std::uint64_t>(split + 1),
                     static_cast<std::uint64_t>(c), i);
        LabeledCloud item;
        item.cloud = sample_shape(static_cast<ShapeClass>(c),
                                  spec.points_per_cloud, spec.jitter_sigma,
                                  cloud_seed);
        item.label = c;
        item.source_id = std::string("synthetic:") +
                         (split == 0 ? "train:" : "test:") +
                         shape_class_name(static_cast<ShapeClass>(c)) + ":" +
                         std::to_string(i);
        ds.items.push_back(std::move(item));
      }
    }
  }
  return data;
}

}  // namespace pcsm
