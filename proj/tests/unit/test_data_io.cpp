#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>

#include "pcsm/common.hpp"
#include "pcsm/io.hpp"
#include "pcsm/shapes.hpp"

using namespace pcsm;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  const fs::path dir = fs::temp_directory_path() / "pcsm_io_tests";
  fs::create_directories(dir);
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), {});
}

double norm3(const Point& p) {
  return std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]);
}

const std::string kUnitCubeOff =
    "OFF\n"
    "8 6 12\n"
    "-0.5 -0.5 -0.5\n"
    "0.5 -0.5 -0.5\n"
    "0.5 0.5 -0.5\n"
    "-0.5 0.5 -0.5\n"
    "-0.5 -0.5 0.5\n"
    "0.5 -0.5 0.5\n"
    "0.5 0.5 0.5\n"
    "-0.5 0.5 0.5\n"
    "4 0 1 2 3\n"
    "4 4 5 6 7\n"
    "4 0 1 5 4\n"
    "4 2 3 7 6\n"
    "4 0 3 7 4\n"
    "4 1 2 6 5\n";

}  // namespace

TEST_CASE("noise-free sphere normalizes onto the unit sphere") {
  const Cloud cloud = sample_shape(ShapeClass::sphere, 64, 0.0, 9);
  for (const Point& p : cloud.points) {
    CHECK(std::abs(norm3(p) - 1.0) <= 1e-9);
  }
}

TEST_CASE("identical specs generate bitwise-identical datasets") {
  ShapeSpec spec;
  spec.points_per_cloud = 48;
  spec.train_per_class = 3;
  spec.test_per_class = 2;
  spec.seed = 44;
  const SyntheticData a = generate_shapes(spec);
  const SyntheticData b = generate_shapes(spec);
  REQUIRE(a.train.items.size() == b.train.items.size());
  for (std::size_t i = 0; i < a.train.items.size(); ++i) {
    CHECK(a.train.items[i].cloud.points == b.train.items[i].cloud.points);
    CHECK(a.train.items[i].label == b.train.items[i].label);
  }
  CHECK(a.train.items.size() == 8 * 3);
  CHECK(a.test.items.size() == 8 * 2);
  CHECK(a.train.class_count == 8);

  // Train and test splits come from different streams.
  CHECK(a.train.items[0].cloud.points != a.test.items[0].cloud.points);
}

TEST_CASE("every generated cloud satisfies the normalization postconditions") {
  ShapeSpec spec;
  spec.points_per_cloud = 40;
  spec.train_per_class = 2;
  spec.test_per_class = 1;
  spec.seed = 21;
  const SyntheticData data = generate_shapes(spec);
  for (const LabeledCloud& item : data.train.items) {
    Point centroid = {0, 0, 0};
    double max_r = 0.0;
    for (const Point& p : item.cloud.points) {
      centroid[0] += p[0];
      centroid[1] += p[1];
      centroid[2] += p[2];
      max_r = std::max(max_r, norm3(p));
    }
    for (int j = 0; j < 3; ++j) {
      CHECK(std::abs(centroid[j] / static_cast<double>(item.cloud.size())) <= 1e-9);
    }
    CHECK(std::abs(max_r - 1.0) <= 1e-9);
  }
}

TEST_CASE("shape spec validation") {
  ShapeSpec spec;
  spec.points_per_cloud = 16;
  CHECK_THROWS_AS(generate_shapes(spec), StructuralError);
  spec.points_per_cloud = 64;
  spec.jitter_sigma = -0.1;
  CHECK_THROWS_AS(generate_shapes(spec), StructuralError);
}

TEST_CASE("normalize_unit_sphere") {
  SUBCASE("idempotent within 1e-9") {
    const Cloud cloud = sample_shape(ShapeClass::torus, 50, 0.02, 13);
    const Cloud again = normalize_unit_sphere(cloud);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      for (int j = 0; j < 3; ++j) {
        CHECK(std::abs(again.points[i][j] - cloud.points[i][j]) <= 1e-9);
      }
    }
  }
  SUBCASE("single point maps to the origin") {
    Cloud one;
    one.points = {{4.0, -2.0, 7.0}};
    const Cloud out = normalize_unit_sphere(one);
    CHECK(out.points[0] == Point{0.0, 0.0, 0.0});
  }
  SUBCASE("random cloud postconditions") {
    Rng rng(2);
    Cloud cloud;
    for (int i = 0; i < 33; ++i) {
      cloud.points.push_back(
          {rng.uniform(-9, 9), rng.uniform(-9, 9), rng.uniform(-9, 9)});
    }
    const Cloud out = normalize_unit_sphere(cloud);
    Point centroid = {0, 0, 0};
    double max_r = 0.0;
    for (const Point& p : out.points) {
      centroid[0] += p[0];
      centroid[1] += p[1];
      centroid[2] += p[2];
      max_r = std::max(max_r, norm3(p));
    }
    for (int j = 0; j < 3; ++j) CHECK(std::abs(centroid[j] / 33.0) <= 1e-9);
    CHECK(std::abs(max_r - 1.0) <= 1e-9);
  }
}

TEST_CASE("xyz loading") {
  const fs::path dir = temp_dir();
  SUBCASE("two points parse") {
    write_text(dir / "ok.xyz", "0 0 0\n1 2 3\n");
    const Cloud cloud = load_xyz(dir / "ok.xyz");
    REQUIRE(cloud.size() == 2);
    CHECK(cloud.points[1] == Point{1.0, 2.0, 3.0});
  }
  SUBCASE("malformed line is reported with its number") {
    write_text(dir / "bad.xyz", "0 0 0\n1 2\n");
    try {
      load_xyz(dir / "bad.xyz");
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()).find(":2:") != std::string::npos);
    }
  }
  SUBCASE("empty file is an error") {
    write_text(dir / "empty.xyz", "");
    CHECK_THROWS_AS(load_xyz(dir / "empty.xyz"), ParseError);
  }
}

TEST_CASE("off loading samples the surface") {
  const fs::path dir = temp_dir();
  write_text(dir / "cube.off", kUnitCubeOff);
  const Cloud cloud = load_off(dir / "cube.off", 1024, 3);
  REQUIRE(cloud.size() == 1024);
  for (const Point& p : cloud.points) {
    const double m = std::max(
        {std::abs(std::abs(p[0]) - 0.5), std::abs(std::abs(p[1]) - 0.5),
         std::abs(std::abs(p[2]) - 0.5)});
    // On some face plane: at least one coordinate sits at +-0.5.
    const bool on_face = std::abs(std::abs(p[0]) - 0.5) <= 1e-9 ||
                         std::abs(std::abs(p[1]) - 0.5) <= 1e-9 ||
                         std::abs(std::abs(p[2]) - 0.5) <= 1e-9;
    CAPTURE(m);
    CHECK(on_face);
    CHECK(std::abs(p[0]) <= 0.5 + 1e-9);
    CHECK(std::abs(p[1]) <= 0.5 + 1e-9);
    CHECK(std::abs(p[2]) <= 0.5 + 1e-9);
  }
  // Deterministic per seed.
  const Cloud again = load_off(dir / "cube.off", 1024, 3);
  CHECK(again.points == cloud.points);
}

TEST_CASE("off parse errors name the line") {
  const fs::path dir = temp_dir();
  SUBCASE("truncated vertex list") {
    write_text(dir / "trunc.off", "OFF\n8 6 12\n0 0 0\n1 1 1\n");
    try {
      load_off(dir / "trunc.off", 16, 0);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()).find(":5:") != std::string::npos);
    }
  }
  SUBCASE("missing header") {
    write_text(dir / "noheader.off", "8 6 12\n");
    CHECK_THROWS_AS(load_off(dir / "noheader.off", 16, 0), ParseError);
  }
  SUBCASE("face index out of range") {
    write_text(dir / "badface.off", "OFF\n1 1 0\n0 0 0\n3 0 1 2\n");
    CHECK_THROWS_AS(load_off(dir / "badface.off", 16, 0), ParseError);
  }
  SUBCASE("vertices only, no faces") {
    write_text(dir / "verts.off", "OFF\n2 0 0\n0 0 0\n1 1 1\n");
    const Cloud cloud = load_off(dir / "verts.off", 16, 0);
    CHECK(cloud.size() == 2);
  }
}

TEST_CASE("colored PLY writes ranks and round-trips coordinates bitwise") {
  const fs::path dir = temp_dir();

  SUBCASE("two ranks hit the ramp endpoints") {
    Cloud cloud;
    cloud.points = {{0.1, 0.2, 0.3}, {-1.0 / 3.0, 0.7, 2e-17}};
    SaliencyMap map;
    map.scores = {5.0, -1.0};
    map.alpha = 1.0;
    const fs::path path = dir / "two.ply";
    write_ply_colored(cloud, map, path);
    const std::string text = read_text(path);
    CHECK(text.find("255 0 0") != std::string::npos);
    CHECK(text.find("0 0 255") != std::string::npos);

    const Cloud back = read_ply(path);
    REQUIRE(back.size() == 2);
    CHECK(back.points == cloud.points);  // shortest round-trip formatting
  }

  SUBCASE("constant scores land on the ramp midpoint") {
    Cloud cloud;
    cloud.points = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
    SaliencyMap map;
    map.scores = {2.0, 2.0, 2.0};
    const fs::path path = dir / "const.ply";
    write_ply_colored(cloud, map, path);
    const std::string text = read_text(path);
    CHECK(text.find("128 0 128") != std::string::npos);
    CHECK(text.find("255 0 0") == std::string::npos);
  }

  SUBCASE("length mismatch is structural") {
    Cloud cloud;
    cloud.points = {{0, 0, 0}};
    SaliencyMap map;
    map.scores = {1.0, 2.0};
    CHECK_THROWS_AS(write_ply_colored(cloud, map, dir / "bad.ply"),
                    StructuralError);
  }

  SUBCASE("random coordinates round-trip bitwise") {
    Rng rng(55);
    Cloud cloud;
    SaliencyMap map;
    for (int i = 0; i < 100; ++i) {
      cloud.points.push_back({rng.normal() * 1e3, rng.normal() * 1e-7,
                              rng.normal()});
      map.scores.push_back(rng.normal());
    }
    const fs::path path = dir / "rand.ply";
    write_ply_colored(cloud, map, path);
    const Cloud back = read_ply(path);
    CHECK(back.points == cloud.points);
  }
}

TEST_CASE("dataset bundle round-trips") {
  ShapeSpec spec;
  spec.points_per_cloud = 40;
  spec.train_per_class = 1;
  spec.test_per_class = 1;
  spec.seed = 77;
  const Dataset ds = generate_shapes(spec).train;
  const fs::path dir = temp_dir() / "bundle";
  save_dataset_bundle(ds, dir);
  CHECK(fs::exists(dir / "labels.csv"));

  const Dataset back = load_dataset_bundle(dir);
  REQUIRE(back.items.size() == ds.items.size());
  CHECK(back.class_count == ds.class_count);
  for (std::size_t i = 0; i < ds.items.size(); ++i) {
    CHECK(back.items[i].label == ds.items[i].label);
    CHECK(back.items[i].cloud.points == ds.items[i].cloud.points);
  }
}

TEST_CASE("bundle loader rejects malformed label files") {
  const fs::path dir = temp_dir() / "badbundle";
  fs::create_directories(dir);
  write_text(dir / "labels.csv", "filename,label\nmissing.xyz,0\n");
  CHECK_THROWS_AS(load_dataset_bundle(dir), ParseError);

  write_text(dir / "labels.csv", "wrong,header\n");
  CHECK_THROWS_AS(load_dataset_bundle(dir), ParseError);
}
