#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "kpose/core.hpp"
#include "kpose/shapes.hpp"
#include "oracles.hpp"

using namespace kpose;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "kpose_test_io";
  fs::create_directories(dir);
  return dir / name;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("PLY cloud round trip is exact and the header is fixed") {
  std::mt19937_64 rng(1);
  PointCloudd c(kpose::testing::random_points(rng, 50, 0.3));
  c = estimate_normals(c, {.k = 5});
  const auto path = scratch("cloud.ply");
  write_ply_cloud(path, c);
  const auto back = read_ply_cloud(path);
  CHECK(back.points == c.points);
  CHECK(back.normals == c.normals);
  const std::string text = read_text(path);
  CHECK(text.rfind(
            "ply\nformat ascii 1.0\nelement vertex 50\nproperty float x\nproperty float y\n"
            "property float z\nproperty float nx\nproperty float ny\nproperty float nz\n"
            "end_header\n",
            0) == 0);

  write_ply_cloud(path, PointCloudd(c.points));
  const auto bare = read_ply_cloud(path);
  CHECK_FALSE(bare.has_normals());
  CHECK(read_text(path).find("nx") == std::string::npos);
}

TEST_CASE("PLY reader skips unknown properties and elements") {
  const auto path = scratch("extra.ply");
  write_text(path,
             "ply\nformat ascii 1.0\ncomment hi\nelement vertex 2\nproperty float y\n"
             "property float x\nproperty uchar red\nproperty float z\nelement face 1\n"
             "property list uchar int vertex_indices\nend_header\n"
             "1 2 255 3\n4.5 -1e-3 0 6\n3 0 1 1\n");
  const auto c = read_ply_cloud(path);
  REQUIRE(c.size() == 2);
  CHECK(c.points.col(0) == Eigen::Vector3d(2, 1, 3));
  CHECK(c.points.col(1) == Eigen::Vector3d(-1e-3, 4.5, 6));
}

TEST_CASE("PLY reader reports the offending line") {
  const auto path = scratch("bad.ply");
  write_text(path, "ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\n"
                   "property float z\nend_header\n0 0 0\n0 zero 0\n");
  CHECK_THROWS_WITH_AS(read_ply_cloud(path), doctest::Contains("bad.ply:9"), ParseError);
  write_text(path, "ply\nformat binary_little_endian 1.0\nend_header\n");
  CHECK_THROWS_AS(read_ply_cloud(path), ParseError);
  CHECK_THROWS_AS(read_ply_cloud(scratch("missing.ply")), IoError);
}

TEST_CASE("OBJ reader fan-triangulates polygons and accepts index forms") {
  const auto path = scratch("quad.obj");
  write_text(path,
             "# unit square\nv 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nvn 0 0 1\n"
             "f 1//1 2//1 3//1 4//1\nf -4 -3 -2\n");
  const auto mesh = read_obj_mesh(path);
  CHECK(mesh.vertex_count() == 4);
  REQUIRE(mesh.triangle_count() == 3);
  CHECK(mesh.triangles.col(0) == Eigen::Vector3i(0, 1, 2));
  CHECK(mesh.triangles.col(1) == Eigen::Vector3i(0, 2, 3));
  CHECK(mesh.triangles.col(2) == Eigen::Vector3i(0, 1, 2));
  CHECK(mesh.surface_area() == doctest::Approx(1.5));

  write_text(path, "v 0 0 0\nv 1 0 0\nv 1 1 oops\n");
  CHECK_THROWS_WITH_AS(read_obj_mesh(path), doctest::Contains("quad.obj:3"), ParseError);
  write_text(path, "v 0 0 0\nf 1 2 3\n");
  CHECK_THROWS_WITH(read_obj_mesh(path), doctest::Contains("out of range"));
}

TEST_CASE("OBJ and PLY mesh round trips") {
  const auto mesh = shapes::l_bracket(0.06, 0.035, 0.008, 0.03);
  const auto path = scratch("bracket.obj");
  write_obj_mesh(path, mesh);
  const auto back = read_mesh(path);
  CHECK(back.vertices == mesh.vertices);
  CHECK(back.triangles == mesh.triangles);

  const auto ply = scratch("tri.ply");
  write_text(ply, "ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\n"
                  "property float z\nelement face 1\nproperty list uchar int vertex_indices\n"
                  "end_header\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n");
  const auto tri = read_mesh(ply);
  CHECK(tri.triangle_count() == 1);
  CHECK(tri.surface_area() == doctest::Approx(0.5));
  CHECK_THROWS_AS(read_mesh(scratch("x.stl")), InvalidArgument);
}

TEST_CASE("format_real round-trips doubles") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1e3, 1e3);
  for (int i = 0; i < 1000; ++i) {
    const double v = u(rng) * std::pow(10.0, i % 7 - 3);
    CHECK(std::stod(format_real(v)) == v);
  }
  CHECK(format_real(0.5) == "0.5");
}

TEST_CASE("shipped shapes are closed and wound outward") {
  const double pi = M_PI;
  CHECK(shapes::cube(0.04).signed_volume() == doctest::Approx(0.04 * 0.04 * 0.04));
  // Inscribed 48-gon prism.
  const double poly = 0.5 * 48 * 0.015 * 0.015 * std::sin(2 * pi / 48) * 0.05;
  CHECK(shapes::cylinder(0.015, 0.05).signed_volume() == doctest::Approx(poly));
  const double l = (0.06 * 0.008 + (0.035 - 0.008) * 0.008) * 0.03;
  CHECK(shapes::l_bracket(0.06, 0.035, 0.008, 0.03).signed_volume() == doctest::Approx(l));
  const double sphere = 4.0 / 3.0 * pi * std::pow(0.022, 3);
  CHECK(shapes::icosphere(0.022, 3).signed_volume() == doctest::Approx(sphere).epsilon(0.02));
  const double screw = shapes::screw(0.005, 0.0015, 0.004, 0.045, 0.01, 0.006).signed_volume();
  const double lo = pi * 0.005 * 0.005 * 0.045 + pi * 0.01 * 0.01 * 0.006;
  const double hi = pi * 0.0065 * 0.0065 * 0.045 + pi * 0.01 * 0.01 * 0.006;
  CHECK(screw > lo);
  CHECK(screw < hi);
  for (const auto& [name, mesh] : shapes::shipped()) {
    CAPTURE(name);
    CHECK_NOTHROW(mesh.validate());
  }
}
