#include "kpose/shapes.hpp"

#include <cmath>
#include <map>

namespace kpose::shapes {
namespace {

class MeshBuilder {
 public:
  int vertex(const Eigen::Vector3d& v) {
    verts_.push_back(v);
    return static_cast<int>(verts_.size() - 1);
  }
  void tri(int a, int b, int c) { tris_.push_back({a, b, c}); }
  void quad(int a, int b, int c, int d) {
    tri(a, b, c);
    tri(a, c, d);
  }
  TriangleMesh build() const {
    TriangleMesh m;
    m.vertices.resize(3, static_cast<Index>(verts_.size()));
    for (std::size_t i = 0; i < verts_.size(); ++i)
      m.vertices.col(static_cast<Index>(i)) = verts_[i];
    m.triangles.resize(3, static_cast<Index>(tris_.size()));
    for (std::size_t i = 0; i < tris_.size(); ++i)
      m.triangles.col(static_cast<Index>(i)) << tris_[i][0], tris_[i][1], tris_[i][2];
    return m;
  }

 private:
  std::vector<Eigen::Vector3d> verts_;
  std::vector<std::array<int, 3>> tris_;
};

}  // namespace

TriangleMesh extrude(const std::vector<Eigen::Vector2d>& profile, double height) {
  MeshBuilder b;
  const int n = static_cast<int>(profile.size());
  std::vector<int> lo(profile.size()), hi(profile.size());
  for (int i = 0; i < n; ++i) {
    lo[i] = b.vertex({profile[i].x(), profile[i].y(), 0.0});
    hi[i] = b.vertex({profile[i].x(), profile[i].y(), height});
  }
  for (int i = 0; i < n; ++i) {
    const int j = (i + 1) % n;
    b.quad(lo[i], lo[j], hi[j], hi[i]);
  }
  for (int i = 1; i + 1 < n; ++i) {
    b.tri(lo[0], lo[i + 1], lo[i]);
    b.tri(hi[0], hi[i], hi[i + 1]);
  }
  return b.build();
}

TriangleMesh box(const Eigen::Vector3d& e) {
  return centered(extrude({{0, 0}, {e.x(), 0}, {e.x(), e.y()}, {0, e.y()}}, e.z()));
}

TriangleMesh cube(double edge) { return box(Eigen::Vector3d::Constant(edge)); }

TriangleMesh cylinder(double radius, double height, int segments) {
  std::vector<Eigen::Vector2d> ring;
  for (int i = 0; i < segments; ++i) {
    const double a = 2 * M_PI * i / segments;
    ring.emplace_back(radius * std::cos(a), radius * std::sin(a));
  }
  return centered(extrude(ring, height));
}

TriangleMesh l_bracket(double leg_a, double leg_b, double thickness, double width) {
  // Profile in the xy plane, extruded along z, then the extrusion axis is
  // swapped to y so the bracket lies as an L in the xz plane.
  TriangleMesh m = extrude({{0, 0},
                            {leg_a, 0},
                            {leg_a, thickness},
                            {thickness, thickness},
                            {thickness, leg_b},
                            {0, leg_b}},
                           width);
  Eigen::Matrix3d swap;
  swap << 1, 0, 0,  //
      0, 0, -1,     //
      0, 1, 0;
  m.vertices = swap * m.vertices;
  return centered(std::move(m));
}

TriangleMesh screw(double shaft_radius, double thread_depth, double pitch,
                   double length, double head_radius, double head_height,
                   int segments, int rows_per_pitch) {
  MeshBuilder b;
  const int rows = std::max(2, static_cast<int>(std::ceil(length / pitch * rows_per_pitch)));
  auto radius_at = [&](double theta, double z) {
    double f = z / pitch - theta / (2 * M_PI);
    f -= std::floor(f);
    const double ridge = 1.0 - std::abs(2.0 * f - 1.0);  // triangle wave
    return shaft_radius + thread_depth * ridge;
  };
  std::vector<std::vector<int>> grid(static_cast<std::size_t>(rows + 1));
  for (int j = 0; j <= rows; ++j) {
    const double z = length * j / rows;
    for (int i = 0; i < segments; ++i) {
      const double a = 2 * M_PI * i / segments;
      const double r = radius_at(a, z);
      grid[j].push_back(b.vertex({r * std::cos(a), r * std::sin(a), z}));
    }
  }
  for (int j = 0; j < rows; ++j)
    for (int i = 0; i < segments; ++i) {
      const int k = (i + 1) % segments;
      b.quad(grid[j][i], grid[j][k], grid[j + 1][k], grid[j + 1][i]);
    }
  const int bottom = b.vertex({0, 0, 0});
  for (int i = 0; i < segments; ++i)
    b.tri(bottom, grid[0][(i + 1) % segments], grid[0][i]);

  std::vector<int> head_lo, head_hi;
  for (int i = 0; i < segments; ++i) {
    const double a = 2 * M_PI * i / segments;
    const Eigen::Vector3d dir(std::cos(a), std::sin(a), 0);
    head_lo.push_back(b.vertex(head_radius * dir + Eigen::Vector3d(0, 0, length)));
    head_hi.push_back(b.vertex(head_radius * dir + Eigen::Vector3d(0, 0, length + head_height)));
  }
  const auto& top = grid[static_cast<std::size_t>(rows)];
  for (int i = 0; i < segments; ++i) {
    const int k = (i + 1) % segments;
    b.quad(top[i], top[k], head_lo[k], head_lo[i]);
    b.quad(head_lo[i], head_lo[k], head_hi[k], head_hi[i]);
  }
  const int cap = b.vertex({0, 0, length + head_height});
  for (int i = 0; i < segments; ++i) b.tri(cap, head_hi[i], head_hi[(i + 1) % segments]);
  return centered(b.build());
}

TriangleMesh icosphere(double radius, int subdivisions) {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Eigen::Vector3d> v = {
      {-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
      {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  for (auto& p : v) p.normalize();
  std::vector<std::array<int, 3>> f = {
      {0, 11, 5}, {0, 5, 1}, {0, 1, 7}, {0, 7, 10}, {0, 10, 11},
      {1, 5, 9}, {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
      {3, 9, 4}, {3, 4, 2}, {3, 2, 6}, {3, 6, 8}, {3, 8, 9},
      {4, 9, 5}, {2, 4, 11}, {6, 2, 10}, {8, 6, 7}, {9, 8, 1}};
  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<int, int>, int> mid;
    auto midpoint = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      if (auto it = mid.find(key); it != mid.end()) return it->second;
      v.push_back((v[a] + v[b]).normalized());
      return mid[key] = static_cast<int>(v.size() - 1);
    };
    std::vector<std::array<int, 3>> next;
    for (const auto& tri : f) {
      const int a = midpoint(tri[0], tri[1]);
      const int b = midpoint(tri[1], tri[2]);
      const int c = midpoint(tri[2], tri[0]);
      next.push_back({tri[0], a, c});
      next.push_back({tri[1], b, a});
      next.push_back({tri[2], c, b});
      next.push_back({a, b, c});
    }
    f = std::move(next);
  }
  MeshBuilder b;
  for (const auto& p : v) b.vertex(radius * p);
  for (const auto& tri : f) b.tri(tri[0], tri[1], tri[2]);
  return b.build();
}

TriangleMesh square(double edge) {
  MeshBuilder b;
  const int a = b.vertex({0, 0, 0});
  const int c = b.vertex({edge, 0, 0});
  const int d = b.vertex({edge, edge, 0});
  const int e = b.vertex({0, edge, 0});
  b.quad(a, c, d, e);
  return b.build();
}

TriangleMesh centered(TriangleMesh mesh) {
  const Eigen::Vector3d mid =
      0.5 * (mesh.vertices.rowwise().minCoeff() + mesh.vertices.rowwise().maxCoeff());
  mesh.vertices.colwise() -= mid;
  return mesh;
}

std::vector<std::pair<std::string, TriangleMesh>> shipped() {
  return {
      {"cube", cube(0.04)},
      {"cylinder", cylinder(0.015, 0.05)},
      {"l_bracket", l_bracket(0.06, 0.035, 0.008, 0.03)},
      {"screw", screw(0.005, 0.0015, 0.004, 0.045, 0.01, 0.006)},
      {"sphere", icosphere(0.022, 3)},
  };
}

}  // namespace kpose::shapes
