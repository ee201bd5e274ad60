#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "pcsm/common.hpp"
#include "pcsm/model.hpp"
#include "pcsm/saliency.hpp"

using namespace pcsm;

namespace {

Cloud random_cloud(Rng& rng, std::size_t n) {
  Cloud c;
  c.points.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    c.points.push_back({rng.normal(), rng.normal(), rng.normal()});
  }
  return c;
}

double norm3(const Point& p) {
  return std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]);
}

// Independent median: sort and pick (mean of middle pair when even).
double median_oracle(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

TEST_CASE("spherical core basics") {
  Cloud odd;
  odd.points = {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}};
  CHECK(spherical_core(odd) == Point{1, 0, 0});

  Cloud even;
  even.points = {{0, 0, 0}, {2, 2, 2}};
  CHECK(spherical_core(even) == Point{1, 1, 1});

  Cloud empty;
  CHECK_THROWS_AS(spherical_core(empty), StructuralError);
}

TEST_CASE("spherical core matches a sort-based oracle on 101 random points") {
  Rng rng(31);
  const Cloud cloud = random_cloud(rng, 101);
  const Point core = spherical_core(cloud);
  for (std::size_t j = 0; j < 3; ++j) {
    std::vector<double> axis;
    for (const Point& p : cloud.points) axis.push_back(p[j]);
    CHECK(core[j] == median_oracle(axis));
  }
  // Even count as well.
  Cloud even = cloud;
  even.points.push_back({0.5, -0.25, 0.125});
  const Point ecore = spherical_core(even);
  for (std::size_t j = 0; j < 3; ++j) {
    std::vector<double> axis;
    for (const Point& p : even.points) axis.push_back(p[j]);
    CHECK(ecore[j] == median_oracle(axis));
  }
}

TEST_CASE("radial gradient of aligned and orthogonal gradients") {
  Cloud cloud;
  cloud.points = {{1, 0, 0}};
  const Point core = {0, 0, 0};

  std::vector<Point> aligned = {{-2.5, 0, 0}};
  CHECK(radial_gradient(cloud, aligned, core)[0] == -2.5);

  std::vector<Point> orthogonal = {{0, 3.0, -1.0}};
  CHECK(radial_gradient(cloud, orthogonal, core)[0] == 0.0);

  std::vector<Point> wrong_size;
  CHECK_THROWS_AS(radial_gradient(cloud, wrong_size, core), StructuralError);
}

TEST_CASE("score follows s = -(dL/dr) * r^(1+alpha)") {
  // dL/dr = -2 at r = 3 with alpha = 1 must give 18.
  Cloud cloud;
  cloud.points = {{3, 0, 0}, {-3, 0, 0}, {0, 3, 0}, {0, -3, 0}, {0, 0, 0}};
  const Point core = spherical_core(cloud);
  CHECK(core == Point{0, 0, 0});
  std::vector<Point> grads = {{-2, 0, 0}, {0, 0, 0}, {0, 0, 0}, {0, 0, 0}, {0, 0, 0}};
  const std::vector<double> rg = radial_gradient(cloud, grads, core);
  CHECK(rg[0] == -2.0);
  CHECK(-rg[0] * std::pow(3.0, 2.0) == 18.0);
}

TEST_CASE("saliency decomposes into radial gradient times r^(1+alpha)") {
  Rng rng(32);
  const ModelParams model = ModelParams::init(8, 41);
  for (double alpha : {0.5, 1.0, 2.0}) {
    const Cloud cloud = random_cloud(rng, 24);
    SaliencyConfig config;
    config.alpha = alpha;
    const SaliencyMap map = saliency_scores(model, cloud, 2, config);
    CHECK(map.alpha == alpha);
    const LossGradients lg = loss_with_input_gradient(model, cloud, 2);
    const std::vector<double> rg =
        radial_gradient(cloud, lg.input_gradient, map.core);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      const Point& p = cloud.points[i];
      const double r = norm3({p[0] - map.core[0], p[1] - map.core[1],
                              p[2] - map.core[2]});
      const double expected = -rg[i] * std::pow(r, 1.0 + alpha);
      CHECK(std::abs(map.scores[i] - expected) <= 1e-12);
    }
  }
}

TEST_CASE("point exactly at the core scores zero") {
  const ModelParams model = ModelParams::init(8, 42);
  Cloud cloud;
  // Point 0 sits at the per-axis median of the cloud.
  cloud.points = {{0, 0, 0}, {1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}};
  REQUIRE(spherical_core(cloud) == Point{0, 0, 0});
  const SaliencyMap map = saliency_scores(model, cloud, 1);
  CHECK(map.scores[0] == 0.0);
}

TEST_CASE("radial gradient matches a radial-shift finite difference") {
  Rng rng(33);
  const ModelParams model = ModelParams::init(8, 43);
  int checked = 0;
  for (int trial = 0; trial < 25; ++trial) {
    const Cloud cloud = random_cloud(rng, 12);
    const int label = static_cast<int>(rng.uniform_index(8));
    const Point core = spherical_core(cloud);
    const LossGradients lg = loss_with_input_gradient(model, cloud, label);
    const std::vector<double> rg =
        radial_gradient(cloud, lg.input_gradient, core);
    for (std::size_t i = 0; i < cloud.size(); i += 3) {
      const Point& p = cloud.points[i];
      const Point d = {p[0] - core[0], p[1] - core[1], p[2] - core[2]};
      const double r = norm3(d);
      if (r < 1e-6) continue;
      const Point unit = {d[0] / r, d[1] / r, d[2] / r};
      const double h = 1e-5;
      auto loss_at = [&](double offset) {
        Cloud shifted = cloud;
        shifted.points[i] = {p[0] + offset * unit[0], p[1] + offset * unit[1],
                             p[2] + offset * unit[2]};
        return loss(model, shifted, label);
      };
      const double numeric = (loss_at(h) - loss_at(-h)) / (2.0 * h);
      const double scale = std::max({std::abs(rg[i]), std::abs(numeric), 1e-3});
      CHECK(std::abs(rg[i] - numeric) <= 1e-3 * scale);
      ++checked;
    }
  }
  CHECK(checked >= 80);
}

TEST_CASE("positive scores mean shifting toward the core raises the loss") {
  Rng rng(34);
  const ModelParams model = ModelParams::init(8, 44);
  int hits = 0, total = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const Cloud cloud = random_cloud(rng, 20);
    const int label = static_cast<int>(rng.uniform_index(8));
    const SaliencyMap map = saliency_scores(model, cloud, label);
    // The strongest positive-score point, where first order dominates.
    std::size_t best = map.scores.size();
    for (std::size_t i = 0; i < map.scores.size(); ++i) {
      if (map.scores[i] > 0.0 &&
          (best == map.scores.size() || map.scores[i] > map.scores[best])) {
        best = i;
      }
    }
    if (best == map.scores.size()) continue;
    const Point& p = cloud.points[best];
    const Point d = {p[0] - map.core[0], p[1] - map.core[1],
                     p[2] - map.core[2]};
    const double r = norm3(d);
    if (r < 1e-3) continue;
    const double delta = 1e-3;
    Cloud shifted = cloud;
    const double k = (r - delta) / r;
    shifted.points[best] = {map.core[0] + k * d[0], map.core[1] + k * d[1],
                            map.core[2] + k * d[2]};
    const double before = loss(model, cloud, label);
    const double after = loss(model, shifted, label);
    ++total;
    if (after > before) ++hits;
  }
  REQUIRE(total >= 50);
  CHECK(static_cast<double>(hits) >= 0.9 * static_cast<double>(total));
}

TEST_CASE("shift_to_center relocates exactly the selected points") {
  Cloud cloud;
  cloud.points = {{1, 1, 1}, {2, 2, 2}, {3, 3, 3}};
  const Point core = {0.5, 0.5, 0.5};

  const Cloud unchanged = shift_to_center(cloud, {}, core);
  CHECK(unchanged.points == cloud.points);

  const Cloud all = shift_to_center(cloud, {0, 1, 2}, core);
  for (const Point& p : all.points) CHECK(p == core);
  CHECK(all.size() == cloud.size());

  const Cloud one = shift_to_center(cloud, {1}, core);
  CHECK(one.points[0] == cloud.points[0]);
  CHECK(one.points[1] == core);
  CHECK(one.points[2] == cloud.points[2]);

  CHECK_THROWS_AS(shift_to_center(cloud, {0, 0}, core), StructuralError);
  CHECK_THROWS_AS(shift_to_center(cloud, {3}, core), StructuralError);
}

TEST_CASE("spherical coordinates reconstruct the point") {
  Rng rng(35);
  for (int trial = 0; trial < 200; ++trial) {
    const Point core = {rng.normal(), rng.normal(), rng.normal()};
    const Point p = {rng.normal(), rng.normal(), rng.normal()};
    const SphericalCoords c = to_spherical(p, core, 1.0);
    const Point d = {p[0] - core[0], p[1] - core[1], p[2] - core[2]};
    CHECK(std::abs(c.r - norm3(d)) <= 1e-12);
    const Point back = from_spherical(c, core);
    for (int j = 0; j < 3; ++j) CHECK(std::abs(back[j] - p[j]) <= 1e-9);
    if (c.r > 0) CHECK(c.rho == doctest::Approx(1.0 / c.r).epsilon(1e-12));
  }
}

TEST_CASE("geometry is scale-covariant about the origin") {
  Rng rng(36);
  const Cloud cloud = random_cloud(rng, 101);  // odd: medians pick elements
  const Point core = spherical_core(cloud);
  const double c = 2.75;
  Cloud scaled = cloud;
  for (Point& p : scaled.points) {
    p[0] *= c;
    p[1] *= c;
    p[2] *= c;
  }
  const Point scaled_core = spherical_core(scaled);
  for (int j = 0; j < 3; ++j) CHECK(scaled_core[j] == c * core[j]);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Point& p = cloud.points[i];
    const Point& q = scaled.points[i];
    const double r = norm3({p[0] - core[0], p[1] - core[1], p[2] - core[2]});
    const double rs = norm3({q[0] - scaled_core[0], q[1] - scaled_core[1],
                             q[2] - scaled_core[2]});
    CHECK(rs == doctest::Approx(c * r).epsilon(1e-9));
  }
}

TEST_CASE("translation leaves every radius unchanged") {
  Rng rng(37);
  const Cloud cloud = random_cloud(rng, 64);
  const Point shift = {10.5, -3.25, 0.75};
  Cloud moved = cloud;
  for (Point& p : moved.points) {
    p[0] += shift[0];
    p[1] += shift[1];
    p[2] += shift[2];
  }
  const Point core = spherical_core(cloud);
  const Point moved_core = spherical_core(moved);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Point& p = cloud.points[i];
    const Point& q = moved.points[i];
    const double r = norm3({p[0] - core[0], p[1] - core[1], p[2] - core[2]});
    const double rm = norm3({q[0] - moved_core[0], q[1] - moved_core[1],
                             q[2] - moved_core[2]});
    CHECK(std::abs(rm - r) <= 1e-9);
  }
}

TEST_CASE("saliency ranks are a permutation with rank 0 on the highest score") {
  const std::vector<double> scores = {0.5, 2.0, -1.0, 2.0};
  const std::vector<std::size_t> ranks = saliency_ranks(scores);
  CHECK(ranks == std::vector<std::size_t>{2, 0, 3, 1});  // tie at 2.0: lower index first
}

TEST_CASE("saliency config validation") {
  const ModelParams model = ModelParams::init(4, 3);
  Cloud cloud;
  cloud.points = {{1, 0, 0}, {0, 1, 0}};
  SaliencyConfig bad;
  bad.alpha = 0.0;
  CHECK_THROWS_AS(saliency_scores(model, cloud, 0, bad), StructuralError);
  bad.alpha = 1.0;
  bad.epsilon_r = 0.0;
  CHECK_THROWS_AS(saliency_scores(model, cloud, 0, bad), StructuralError);
}
