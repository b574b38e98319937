#pragma once

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "kpose/core/mesh.hpp"

namespace kpose::shapes {

/// Closed polygon prism: `profile` is a simple CCW polygon in the xy plane
/// that is star-shaped with respect to its first vertex; it is extruded
/// along +z by `height`.
TriangleMesh extrude(const std::vector<Eigen::Vector2d>& profile, double height);

TriangleMesh box(const Eigen::Vector3d& extent);
TriangleMesh cube(double edge);
TriangleMesh cylinder(double radius, double height, int segments = 48);
/// L-shaped bracket: legs `leg_a` x `leg_b`, plate `thickness`, width `width`.
TriangleMesh l_bracket(double leg_a, double leg_b, double thickness, double width);
/// Threaded rod with a cylindrical head; the thread is a triangular radial
/// ridge that advances `pitch` per turn.
TriangleMesh screw(double shaft_radius, double thread_depth, double pitch,
                   double length, double head_radius, double head_height,
                   int segments = 64, int rows_per_pitch = 8);
TriangleMesh icosphere(double radius, int subdivisions = 3);
/// Axis-aligned square in the z = 0 plane, two triangles, normal +z.
TriangleMesh square(double edge);

/// Translates vertices so the bounding box is centered on the origin.
TriangleMesh centered(TriangleMesh mesh);

/// The procedural test objects shipped with the repository, at bin-picking
/// scale (meters): cube, cylinder, l_bracket, screw, sphere.
std::vector<std::pair<std::string, TriangleMesh>> shipped();

}  // namespace kpose::shapes
