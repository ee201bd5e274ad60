#include "pcsm/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>

#include "pcsm/common.hpp"

namespace pcsm {

namespace {

[[noreturn]] void parse_fail(const std::filesystem::path& path,
                             std::size_t line, const std::string& what) {
  throw ParseError(path.string() + ":" + std::to_string(line) + ": " + what);
}

bool blank(const std::string& s) {
  return s.find_first_not_of(" \t\r\n") == std::string::npos;
}

// Strict double parse of one whitespace-separated token stream.
bool parse_doubles(const std::string& line, double* out, std::size_t count) {
  const char* p = line.c_str();
  for (std::size_t i = 0; i < count; ++i) {
    char* end = nullptr;
    out[i] = std::strtod(p, &end);
    if (end == p) return false;
    p = end;
  }
  while (*p == ' ' || *p == '\t' || *p == '\r') ++p;
  return *p == '\0';
}

struct LineReader {
  std::ifstream in;
  std::size_t line_no = 0;

  explicit LineReader(const std::filesystem::path& path) : in(path) {}

  bool next(std::string& line) {
    while (std::getline(in, line)) {
      ++line_no;
      if (!blank(line)) return true;
    }
    return false;
  }
};

double triangle_area(const Point& a, const Point& b, const Point& c) {
  const double ux = b[0] - a[0], uy = b[1] - a[1], uz = b[2] - a[2];
  const double vx = c[0] - a[0], vy = c[1] - a[1], vz = c[2] - a[2];
  const double cx = uy * vz - uz * vy;
  const double cy = uz * vx - ux * vz;
  const double cz = ux * vy - uy * vx;
  return 0.5 * std::sqrt(cx * cx + cy * cy + cz * cz);
}

}  // namespace

Cloud load_xyz(const std::filesystem::path& path) {
  LineReader reader(path);
  if (!reader.in) throw ParseError(path.string() + ": cannot open file");
  Cloud cloud;
  std::string line;
  while (reader.next(line)) {
    Point p;
    if (!parse_doubles(line, p.data(), 3)) {
      parse_fail(path, reader.line_no, "expected three decimals");
    }
    cloud.points.push_back(p);
  }
  if (cloud.empty()) {
    throw ParseError(path.string() + ": no points");
  }
  return cloud;
}

void write_xyz(const Cloud& cloud, const std::filesystem::path& path) {
  std::string out;
  for (const Point& p : cloud.points) {
    out += format_double(p[0]);
    out += ' ';
    out += format_double(p[1]);
    out += ' ';
    out += format_double(p[2]);
    out += '\n';
  }
  atomic_write_file(path, out);
}

Cloud load_off(const std::filesystem::path& path, std::size_t sample_points,
               std::uint64_t seed) {
  LineReader reader(path);
  if (!reader.in) throw ParseError(path.string() + ": cannot open file");
  std::string line;
  if (!reader.next(line)) parse_fail(path, 1, "empty file");

  std::istringstream header(line);
  std::string magic;
  header >> magic;
  if (magic != "OFF") parse_fail(path, reader.line_no, "missing OFF header");

  std::size_t nv = 0, nf = 0, ne = 0;
  if (!(header >> nv >> nf >> ne)) {
    if (!reader.next(line)) {
      parse_fail(path, reader.line_no + 1, "missing vertex/face counts");
    }
    std::istringstream counts(line);
    if (!(counts >> nv >> nf >> ne)) {
      parse_fail(path, reader.line_no, "malformed vertex/face counts");
    }
  }
  if (nv == 0) parse_fail(path, reader.line_no, "no vertices declared");

  std::vector<Point> vertices(nv);
  for (std::size_t i = 0; i < nv; ++i) {
    if (!reader.next(line)) {
      parse_fail(path, reader.line_no + 1, "truncated vertex list");
    }
    if (!parse_doubles(line, vertices[i].data(), 3)) {
      parse_fail(path, reader.line_no, "malformed vertex");
    }
  }

  std::vector<std::array<std::size_t, 3>> triangles;
  for (std::size_t f = 0; f < nf; ++f) {
    if (!reader.next(line)) {
      parse_fail(path, reader.line_no + 1, "truncated face list");
    }
    std::istringstream fs(line);
    std::size_t m = 0;
    if (!(fs >> m) || m < 3) parse_fail(path, reader.line_no, "malformed face");
    std::vector<std::size_t> idx(m);
    for (std::size_t j = 0; j < m; ++j) {
      if (!(fs >> idx[j]) || idx[j] >= nv) {
        parse_fail(path, reader.line_no, "face index out of range");
      }
    }
    for (std::size_t j = 1; j + 1 < m; ++j) {  // fan triangulation
      triangles.push_back({idx[0], idx[j], idx[j + 1]});
    }
  }

  if (triangles.empty()) {
    Cloud cloud;
    cloud.points = std::move(vertices);
    return cloud;
  }
  if (sample_points == 0) {
    throw StructuralError("load_off: sample point count must be positive");
  }

  std::vector<double> cumulative(triangles.size());
  double total = 0.0;
  for (std::size_t t = 0; t < triangles.size(); ++t) {
    total += triangle_area(vertices[triangles[t][0]], vertices[triangles[t][1]],
                           vertices[triangles[t][2]]);
    cumulative[t] = total;
  }
  if (!(total > 0.0)) {
    throw ParseError(path.string() + ": mesh has zero surface area");
  }

  Rng rng(seed);
  Cloud cloud;
  cloud.points.reserve(sample_points);
  for (std::size_t i = 0; i < sample_points; ++i) {
    const double pick = rng.uniform01() * total;
    const std::size_t t = static_cast<std::size_t>(
        std::lower_bound(cumulative.begin(), cumulative.end(), pick) -
        cumulative.begin());
    const Point& a = vertices[triangles[t][0]];
    const Point& b = vertices[triangles[t][1]];
    const Point& c = vertices[triangles[t][2]];
    double u = rng.uniform01();
    double v = rng.uniform01();
    if (u + v > 1.0) {
      u = 1.0 - u;
      v = 1.0 - v;
    }
    cloud.points.push_back({a[0] + u * (b[0] - a[0]) + v * (c[0] - a[0]),
                            a[1] + u * (b[1] - a[1]) + v * (c[1] - a[1]),
                            a[2] + u * (b[2] - a[2]) + v * (c[2] - a[2])});
  }
  return cloud;
}

void write_ply_colored(const Cloud& cloud, const SaliencyMap& map,
                       const std::filesystem::path& path) {
  if (map.scores.size() != cloud.size()) {
    throw StructuralError("ply: map length does not match cloud");
  }
  const std::size_t n = cloud.size();

  // Color position: average rank of the point's tied-score group, normalized
  // to [0,1]; constant maps land on the ramp midpoint.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (map.scores[a] != map.scores[b]) return map.scores[a] > map.scores[b];
    return a < b;
  });
  std::vector<double> t(n, 0.5);
  if (n > 1) {
    std::size_t run = 0;
    while (run < n) {
      std::size_t end = run;
      while (end + 1 < n &&
             map.scores[order[end + 1]] == map.scores[order[run]]) {
        ++end;
      }
      const double avg = 0.5 * static_cast<double>(run + end);
      for (std::size_t k = run; k <= end; ++k) {
        t[order[k]] = avg / static_cast<double>(n - 1);
      }
      run = end + 1;
    }
  }

  std::string out;
  out += "ply\nformat ascii 1.0\n";
  out += "element vertex " + std::to_string(n) + "\n";
  out += "property double x\nproperty double y\nproperty double z\n";
  out += "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  out += "end_header\n";
  for (std::size_t i = 0; i < n; ++i) {
    const long red = std::lround(255.0 * (1.0 - t[i]));
    const long blue = std::lround(255.0 * t[i]);
    out += format_double(cloud.points[i][0]);
    out += ' ';
    out += format_double(cloud.points[i][1]);
    out += ' ';
    out += format_double(cloud.points[i][2]);
    out += ' ';
    out += std::to_string(red);
    out += " 0 ";
    out += std::to_string(blue);
    out += '\n';
  }
  atomic_write_file(path, out);
}

Cloud read_ply(const std::filesystem::path& path) {
  LineReader reader(path);
  if (!reader.in) throw ParseError(path.string() + ": cannot open file");
  std::string line;
  if (!reader.next(line) || line != "ply") {
    parse_fail(path, reader.line_no, "not a PLY file");
  }
  std::size_t vertex_count = 0;
  std::vector<std::string> properties;
  bool in_vertex_element = false;
  for (;;) {
    if (!reader.next(line)) {
      parse_fail(path, reader.line_no + 1, "missing end_header");
    }
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (word == "end_header") break;
    if (word == "format") {
      std::string kind;
      ls >> kind;
      if (kind != "ascii") parse_fail(path, reader.line_no, "not ASCII PLY");
    } else if (word == "element") {
      std::string name;
      ls >> name >> vertex_count;
      in_vertex_element = name == "vertex";
      if (!in_vertex_element) {
        parse_fail(path, reader.line_no, "unsupported element " + name);
      }
    } else if (word == "property" && in_vertex_element) {
      std::string type, name;
      ls >> type >> name;
      properties.push_back(name);
    }
  }
  auto index_of = [&](const std::string& name) {
    const auto it = std::find(properties.begin(), properties.end(), name);
    if (it == properties.end()) {
      throw ParseError(path.string() + ": missing vertex property " + name);
    }
    return static_cast<std::size_t>(it - properties.begin());
  };
  const std::size_t ix = index_of("x"), iy = index_of("y"), iz = index_of("z");

  Cloud cloud;
  cloud.points.reserve(vertex_count);
  std::vector<double> row(properties.size());
  for (std::size_t i = 0; i < vertex_count; ++i) {
    if (!reader.next(line)) {
      parse_fail(path, reader.line_no + 1, "truncated vertex data");
    }
    if (!parse_doubles(line, row.data(), row.size())) {
      parse_fail(path, reader.line_no, "malformed vertex row");
    }
    cloud.points.push_back({row[ix], row[iy], row[iz]});
  }
  return cloud;
}

void save_dataset_bundle(const Dataset& dataset,
                         const std::filesystem::path& dir) {
  if (dataset.items.empty()) {
    throw StructuralError("bundle: empty dataset");
  }
  std::filesystem::create_directories(dir);
  std::string labels = "filename,label\n";
  char name[32];
  for (std::size_t i = 0; i < dataset.items.size(); ++i) {
    std::snprintf(name, sizeof(name), "cloud_%06zu.xyz", i);
    write_xyz(dataset.items[i].cloud, dir / name);
    labels += name;
    labels += ',';
    labels += std::to_string(dataset.items[i].label);
    labels += '\n';
  }
  atomic_write_file(dir / "labels.csv", labels);
}

Dataset load_dataset_bundle(const std::filesystem::path& dir) {
  const std::filesystem::path labels_path = dir / "labels.csv";
  LineReader reader(labels_path);
  if (!reader.in) {
    throw ParseError(labels_path.string() + ": cannot open file");
  }
  std::string line;
  if (!reader.next(line) || line != "filename,label") {
    parse_fail(labels_path, reader.line_no, "expected header filename,label");
  }
  Dataset dataset;
  int max_label = -1;
  while (reader.next(line)) {
    const std::size_t comma = line.find(',');
    if (comma == std::string::npos) {
      parse_fail(labels_path, reader.line_no, "expected filename,label");
    }
    LabeledCloud item;
    item.source_id = line.substr(0, comma);
    try {
      item.label = std::stoi(line.substr(comma + 1));
    } catch (const std::exception&) {
      parse_fail(labels_path, reader.line_no, "malformed label");
    }
    if (item.label < 0) {
      parse_fail(labels_path, reader.line_no, "negative label");
    }
    item.cloud = load_xyz(dir / item.source_id);
    max_label = std::max(max_label, item.label);
    dataset.items.push_back(std::move(item));
  }
  if (dataset.items.empty()) {
    throw ParseError(labels_path.string() + ": no entries");
  }
  dataset.class_count = max_label + 1;
  return dataset;
}

}  // namespace pcsm
