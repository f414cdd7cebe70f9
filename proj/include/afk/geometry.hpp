// Copyright 2026 The AFK Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef AFK_GEOMETRY_HPP_
#define AFK_GEOMETRY_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "afk/error.hpp"
#include "afk/random.hpp"
#include "afk/vec3.hpp"

namespace afk {

struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> triangles;

  double triangle_area(std::size_t t) const {
    const Vec3& a = vertices[triangles[t][0]];
    const Vec3& b = vertices[triangles[t][1]];
    const Vec3& c = vertices[triangles[t][2]];
    return 0.5 * (b - a).cross(c - a).norm();
  }

  double surface_area() const {
    double area = 0.0;
    for (std::size_t t = 0; t < triangles.size(); ++t) area += triangle_area(t);
    return area;
  }

  void check_valid() const {
    if (triangles.empty()) throw EmptyMeshError("mesh has no triangles");
    const int n = static_cast<int>(vertices.size());
    for (const auto& tri : triangles) {
      for (int idx : tri) {
        if (idx < 0 || idx >= n)
          throw MalformedMeshError("triangle index out of range");
      }
    }
    for (const Vec3& v : vertices) {
      if (!v.finite()) throw MalformedMeshError("non-finite vertex coordinate");
    }
    if (!(surface_area() > 0.0))
      throw MalformedMeshError("mesh has zero surface area");
  }
};

struct BoundingBox {
  Vec3 min_corner;
  Vec3 max_corner;

  Vec3 extent() const { return max_corner - min_corner; }
  Vec3 center() const { return (min_corner + max_corner) * 0.5; }
};

/// Parses Wavefront OBJ text: v and f records, everything else ignored.
/// Polygon faces are fan-triangulated from the first vertex.
inline TriangleMesh parse_obj(std::istream& in, const std::string& origin) {
  TriangleMesh mesh;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag)) continue;
    if (tag == "v") {
      double x, y, z;
      if (!(ls >> x >> y >> z))
        throw MalformedMeshError(origin + ":" + std::to_string(line_no) +
                                 ": bad vertex record");
      mesh.vertices.push_back({x, y, z});
    } else if (tag == "f") {
      std::vector<int> face;
      std::string item;
      while (ls >> item) {
        // "f v", "f v/vt", "f v/vt/vn", "f v//vn" all start with the vertex id.
        std::size_t slash = item.find('/');
        const std::string v = slash == std::string::npos ? item : item.substr(0, slash);
        int idx = 0;
        try {
          idx = std::stoi(v);
        } catch (const std::exception&) {
          throw MalformedMeshError(origin + ":" + std::to_string(line_no) +
                                   ": bad face index '" + item + "'");
        }
        // OBJ indices are 1-based; negative indices count from the end.
        if (idx < 0) idx = static_cast<int>(mesh.vertices.size()) + idx + 1;
        if (idx < 1 || idx > static_cast<int>(mesh.vertices.size()))
          throw MalformedMeshError(origin + ":" + std::to_string(line_no) +
                                   ": face index out of range");
        face.push_back(idx - 1);
      }
      if (face.size() < 3)
        throw MalformedMeshError(origin + ":" + std::to_string(line_no) +
                                 ": face with fewer than 3 vertices");
      for (std::size_t i = 1; i + 1 < face.size(); ++i) {
        mesh.triangles.push_back({face[0], face[i], face[i + 1]});
      }
    }
  }
  if (mesh.triangles.empty()) throw EmptyMeshError(origin + ": no faces");
  mesh.check_valid();
  return mesh;
}

inline TriangleMesh load_obj(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open OBJ file: " + path);
  return parse_obj(in, path);
}

inline BoundingBox bounding_box(const TriangleMesh& mesh) {
  mesh.check_valid();
  constexpr double inf = std::numeric_limits<double>::infinity();
  BoundingBox box{{inf, inf, inf}, {-inf, -inf, -inf}};
  for (const Vec3& v : mesh.vertices) {
    box.min_corner.x = std::min(box.min_corner.x, v.x);
    box.min_corner.y = std::min(box.min_corner.y, v.y);
    box.min_corner.z = std::min(box.min_corner.z, v.z);
    box.max_corner.x = std::max(box.max_corner.x, v.x);
    box.max_corner.y = std::max(box.max_corner.y, v.y);
    box.max_corner.z = std::max(box.max_corner.z, v.z);
  }
  return box;
}

/// Closed-box containment.
inline bool contains(const BoundingBox& box, const Vec3& p) {
  return p.x >= box.min_corner.x && p.x <= box.max_corner.x &&
         p.y >= box.min_corner.y && p.y <= box.max_corner.y &&
         p.z >= box.min_corner.z && p.z <= box.max_corner.z;
}

/// 12-triangle box mesh, the stand-in geometry for rooms declared only by
/// bounding box in the corpus manifest.
inline TriangleMesh box_mesh(const BoundingBox& box) {
  const Vec3& a = box.min_corner;
  const Vec3& b = box.max_corner;
  TriangleMesh mesh;
  mesh.vertices = {
      {a.x, a.y, a.z}, {b.x, a.y, a.z}, {b.x, b.y, a.z}, {a.x, b.y, a.z},
      {a.x, a.y, b.z}, {b.x, a.y, b.z}, {b.x, b.y, b.z}, {a.x, b.y, b.z}};
  mesh.triangles = {{0, 2, 1}, {0, 3, 2},   // z = min
                    {4, 5, 6}, {4, 6, 7},   // z = max
                    {0, 1, 5}, {0, 5, 4},   // y = min
                    {3, 6, 2}, {3, 7, 6},   // y = max
                    {0, 4, 7}, {0, 7, 3},   // x = min
                    {1, 2, 6}, {1, 6, 5}};  // x = max
  return mesh;
}

/// K surface points plus the elimination radius they satisfy.
struct BouncePointSet {
  std::vector<Vec3> points;
  std::string source_mesh_id;
  double radius = 0.0;  // min pairwise distance of the result
};

namespace geometry_detail {

inline Vec3 sample_triangle(const TriangleMesh& mesh, std::size_t t, double u, double v) {
  if (u + v > 1.0) {
    u = 1.0 - u;
    v = 1.0 - v;
  }
  const Vec3& a = mesh.vertices[mesh.triangles[t][0]];
  const Vec3& b = mesh.vertices[mesh.triangles[t][1]];
  const Vec3& c = mesh.vertices[mesh.triangles[t][2]];
  return a + (b - a) * u + (c - a) * v;
}

}  // namespace geometry_detail

/// Poisson-disk sampling of a mesh surface by weighted sample elimination:
/// draw 8k area-weighted uniform candidates, then greedily remove the point
/// with the highest local density weight until exactly k remain. Ties break
/// by candidate index, so the result is deterministic for (mesh, k, seed).
inline BouncePointSet poisson_disk_sample(const TriangleMesh& mesh, int k,
                                          std::uint64_t seed,
                                          const std::string& mesh_id = "") {
  mesh.check_valid();
  if (k < 1) throw InvalidInputError("sample count must be >= 1");

  // Area-weighted candidate draw.
  const std::size_t pool = static_cast<std::size_t>(8) * k;
  std::vector<double> cum_area(mesh.triangles.size());
  double total = 0.0;
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    total += mesh.triangle_area(t);
    cum_area[t] = total;
  }
  Rng rng(seed);
  std::vector<Vec3> candidates;
  candidates.reserve(pool);
  for (std::size_t i = 0; i < pool; ++i) {
    const double pick = rng.uniform() * total;
    const std::size_t t =
        std::lower_bound(cum_area.begin(), cum_area.end(), pick) - cum_area.begin();
    candidates.push_back(geometry_detail::sample_triangle(
        mesh, std::min(t, mesh.triangles.size() - 1), rng.uniform(), rng.uniform()));
  }
  if (candidates.size() < static_cast<std::size_t>(k))
    throw InfeasibleSampleCountError("candidate pool smaller than requested k");

  // Target radius from the hexagonal packing bound for k samples on area A.
  const double r_max = std::sqrt(total / (2.0 * std::sqrt(3.0) * k));
  const double cutoff = 2.0 * r_max;

  // Neighbor lists within the cutoff; weights w(d) = (1 - d/(2 r_max))^8.
  const std::size_t n = candidates.size();
  std::vector<std::vector<std::pair<std::size_t, double>>> neighbors(n);
  std::vector<double> weight(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = distance(candidates[i], candidates[j]);
      if (d < cutoff) {
        const double w = std::pow(1.0 - d / cutoff, 8.0);
        neighbors[i].push_back({j, w});
        neighbors[j].push_back({i, w});
        weight[i] += w;
        weight[j] += w;
      }
    }
  }

  std::vector<bool> alive(n, true);
  std::size_t remaining = n;
  while (remaining > static_cast<std::size_t>(k)) {
    std::size_t worst = n;
    double worst_w = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (alive[i] && weight[i] > worst_w) {
        worst_w = weight[i];
        worst = i;
      }
    }
    alive[worst] = false;
    --remaining;
    for (const auto& [j, w] : neighbors[worst]) {
      if (alive[j]) weight[j] -= w;
    }
  }

  BouncePointSet out;
  out.source_mesh_id = mesh_id;
  out.points.reserve(k);
  for (std::size_t i = 0; i < n; ++i) {
    if (alive[i]) out.points.push_back(candidates[i]);
  }

  double min_dist = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < out.points.size(); ++i) {
    for (std::size_t j = i + 1; j < out.points.size(); ++j) {
      min_dist = std::min(min_dist, distance(out.points[i], out.points[j]));
    }
  }
  out.radius = out.points.size() > 1 ? min_dist : r_max;
  return out;
}

/// CSV serialization: "# k=<K> seed=<S>" header then one x,y,z row per point.
inline void write_bounce_points_csv(std::ostream& out, const BouncePointSet& set,
                                    std::uint64_t seed) {
  out << "# k=" << set.points.size() << " seed=" << seed << "\n";
  out.precision(17);
  for (const Vec3& p : set.points) {
    out << p.x << "," << p.y << "," << p.z << "\n";
  }
}

}  // namespace afk

#endif  // AFK_GEOMETRY_HPP_
