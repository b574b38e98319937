#pragma once

#include <Eigen/Core>

#include "kpose/core/error.hpp"
#include "kpose/core/point_cloud.hpp"

namespace kpose {

/// Indexed triangle soup. Faces are expected to wind counter-clockwise seen
/// from outside; face normals follow that winding.
struct TriangleMesh {
  Eigen::Matrix3Xd vertices;
  Eigen::Matrix3Xi triangles;

  Index vertex_count() const { return vertices.cols(); }
  Index triangle_count() const { return triangles.cols(); }

  Eigen::Vector3d corner(Index tri, int k) const {
    return vertices.col(triangles(k, tri));
  }

  /// Cross product of the two edges; its norm is twice the face area.
  Eigen::Vector3d face_cross(Index tri) const {
    const Eigen::Vector3d a = corner(tri, 0);
    return (corner(tri, 1) - a).cross(corner(tri, 2) - a);
  }

  double face_area(Index tri) const { return 0.5 * face_cross(tri).norm(); }

  double surface_area() const {
    double area = 0;
    for (Index t = 0; t < triangle_count(); ++t) area += face_area(t);
    return area;
  }

  /// Positive for closed meshes wound outward.
  double signed_volume() const {
    double v = 0;
    for (Index t = 0; t < triangle_count(); ++t)
      v += corner(t, 0).dot(corner(t, 1).cross(corner(t, 2)));
    return v / 6.0;
  }

  /// Throws unless indices are in range and the total area is positive.
  void validate() const {
    if (triangles.cols() == 0) throw DegenerateError("mesh has no triangles");
    if (triangles.minCoeff() < 0 || triangles.maxCoeff() >= vertices.cols())
      throw InvalidArgument("triangle index out of range");
    if (!vertices.allFinite()) throw InvalidArgument("non-finite vertex");
    if (!(surface_area() > 0)) throw DegenerateError("mesh has zero area");
  }
};

}  // namespace kpose
