#pragma once

#include <filesystem>
#include <string>

#include "kpose/core/mesh.hpp"
#include "kpose/core/point_cloud.hpp"

namespace kpose {

/// ASCII PLY with `x y z [nx ny nz]` vertex properties. Extra vertex
/// properties and other elements are skipped on read.
PointCloudd read_ply_cloud(const std::filesystem::path& path);
void write_ply_cloud(const std::filesystem::path& path, const PointCloudd& cloud);

/// OBJ `v`/`f` records; polygons are fan-triangulated, `v/vt/vn` index
/// forms and negative indices are accepted.
TriangleMesh read_obj_mesh(const std::filesystem::path& path);
void write_obj_mesh(const std::filesystem::path& path, const TriangleMesh& mesh);

/// ASCII PLY carrying a face element (`property list <t> <t> vertex_indices`).
TriangleMesh read_ply_mesh(const std::filesystem::path& path);

/// Dispatches on extension: .obj or .ply.
TriangleMesh read_mesh(const std::filesystem::path& path);

/// Shortest decimal form that parses back to the same double, independent
/// of the global locale.
std::string format_real(double value);

}  // namespace kpose
