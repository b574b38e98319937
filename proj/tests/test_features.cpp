#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>

#include "doctest.h"
#include "kpose/core.hpp"
#include "kpose/features.hpp"
#include "kpose/sampling.hpp"
#include "kpose/shapes.hpp"
#include "oracles.hpp"

using namespace kpose;
using kpose::testing::random_pose;

namespace {

const ObjectModel& model_of(const std::string& name) {
  static std::map<std::string, ObjectModel> cache;
  auto it = cache.find(name);
  if (it != cache.end()) return it->second;
  for (auto& [n, mesh] : shapes::shipped())
    if (n == name) return cache.emplace(name, build_object_model(mesh, 100, 4)).first->second;
  throw std::runtime_error("unknown shape " + name);
}

// Regular grid on z = 0 with +z normals.
PointCloudd plane_grid(int side, double step) {
  Eigen::Matrix3Xd pts(3, side * side);
  for (int i = 0; i < side; ++i)
    for (int j = 0; j < side; ++j) pts.col(i * side + j) = Eigen::Vector3d(i * step, j * step, 0);
  Eigen::Matrix3Xd nrm(3, pts.cols());
  nrm.colwise() = Eigen::Vector3d::UnitZ();
  return PointCloudd(pts, nrm);
}

// Brute force reference: O(n^2) neighborhoods, same histogram rules.
FpfhMatrix reference_fpfh(const PointCloudd& c, double radius) {
  const Index n = c.size();
  auto bin = [](double v, double lo, double hi) {
    int b = static_cast<int>(std::floor(11 * (v - lo) / (hi - lo)));
    return std::min(std::max(b, 0), 10);
  };
  std::vector<std::vector<Index>> nb(static_cast<std::size_t>(n));
  FpfhMatrix spfh = FpfhMatrix::Zero(33, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      const double d = (c.points.col(i) - c.points.col(j)).norm();
      if (j != i && d > 0 && d <= radius) nb[static_cast<std::size_t>(i)].push_back(j);
    }
    const auto& list = nb[static_cast<std::size_t>(i)];
    for (Index j : list) {
      const auto f = pair_features(c.point(i), c.normal(i), c.point(j), c.normal(j));
      spfh(bin(f.theta, -M_PI, M_PI), i) += 100.0 / static_cast<double>(list.size());
      spfh(11 + bin(f.alpha, -1, 1), i) += 100.0 / static_cast<double>(list.size());
      spfh(22 + bin(f.phi, -1, 1), i) += 100.0 / static_cast<double>(list.size());
    }
  }
  FpfhMatrix out = FpfhMatrix::Zero(33, n);
  for (Index i = 0; i < n; ++i) {
    const auto& list = nb[static_cast<std::size_t>(i)];
    if (list.empty()) continue;
    FpfhDescriptor h = spfh.col(i);
    for (Index j : list)
      h += spfh.col(j) / (c.points.col(i) - c.points.col(j)).norm() / static_cast<double>(list.size());
    for (int b = 0; b < 3; ++b) h.segment<11>(11 * b) *= 100.0 / h.segment<11>(11 * b).sum();
    out.col(i) = h;
  }
  return out;
}

}  // namespace

TEST_CASE("pair_features: analytic Darboux angles") {
  const Eigen::Vector3d z = Eigen::Vector3d::UnitZ();
  auto f = pair_features(Eigen::Vector3d::Zero(), z, Eigen::Vector3d(1, 0, 0), z);
  CHECK(f.theta == doctest::Approx(0.0));
  CHECK(f.alpha == doctest::Approx(0.0));
  CHECK(f.phi == doctest::Approx(0.0));
  CHECK(f.distance == doctest::Approx(1.0));

  // The tilted normal is closer to the connecting line, so p2 becomes the
  // source: u = n2, v = +y, w = (-cos b, 0, sin b), theta = b, phi = -sin b.
  for (double b : {0.3, -0.7, 1.2}) {
    f = pair_features(Eigen::Vector3d::Zero(), z, Eigen::Vector3d(2, 0, 0),
                      Eigen::Vector3d(std::sin(b), 0, std::cos(b)));
    CHECK(f.theta == doctest::Approx(b));
    CHECK(f.alpha == doctest::Approx(0.0));
    CHECK(f.phi == doctest::Approx(-std::sin(b)));
    CHECK(f.distance == doctest::Approx(2.0));
  }
  // Tilting towards -y (along v) moves alpha instead.
  f = pair_features(Eigen::Vector3d::Zero(), z, Eigen::Vector3d(1, 0, 0),
                    Eigen::Vector3d(0, -std::sin(0.4), std::cos(0.4)));
  CHECK(f.alpha == doctest::Approx(std::sin(0.4)));
  // The point whose normal is closer to the connecting line becomes the source.
  const Eigen::Vector3d n1 = Eigen::Vector3d(1, 0, 1).normalized();
  f = pair_features(Eigen::Vector3d::Zero(), z, Eigen::Vector3d(1, 0, 0), n1);
  CHECK(f.phi == doctest::Approx(-n1.x()));
  // Parallel normals tie; either argument order gives the same features.
  const Eigen::Vector3d a(0, 0, 0), b(1, 0, 0.5);
  const auto ab = pair_features(a, z, b, z), ba = pair_features(b, z, a, z);
  CHECK(ab.phi > 0);
  CHECK(ab.phi == doctest::Approx(ba.phi));
  CHECK(ab.theta == doctest::Approx(ba.theta));
  CHECK(ab.alpha == doctest::Approx(ba.alpha));
}

TEST_CASE("compute_fpfh matches a brute force reference") {
  std::mt19937_64 rng(1);
  const PointCloudd base = model_of("l_bracket").cloud;
  std::vector<Index> pick;
  for (Index i = 0; i < base.size(); i += 4) pick.push_back(i);
  const PointCloudd c = base.select(pick);
  const double r = default_fpfh_radius(c);
  const auto fc = compute_fpfh(c, r, 1);
  const FpfhMatrix ref = reference_fpfh(c, r);
  CHECK((fc.descriptors - ref).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(compute_fpfh(c, r, 3).descriptors == fc.descriptors);
}

TEST_CASE("compute_fpfh: plane interior concentrates in the central bins") {
  const PointCloudd plane = plane_grid(21, 0.001);
  const auto fc = compute_fpfh(plane, 0.0035, 1);
  for (int i = 5; i < 16; ++i)
    for (int j = 5; j < 16; ++j) {
      const auto h = fc.descriptors.col(i * 21 + j);
      CHECK(h(5) == doctest::Approx(100.0));
      CHECK(h(11 + 5) == doctest::Approx(100.0));
      CHECK(h(22 + 5) == doctest::Approx(100.0));
    }
}

TEST_CASE("compute_fpfh: sphere and plane are distinguishable") {
  const PointCloudd sphere = model_of("sphere").cloud;
  const double r = default_fpfh_radius(sphere);
  const auto fs = compute_fpfh(sphere, r, 1);
  const double step = mean_spacing(sphere);
  const auto fp = compute_fpfh(plane_grid(41, step), r, 1);
  const FpfhDescriptor centre = fp.descriptors.col(20 * 41 + 20);
  for (Index i = 0; i < sphere.size(); i += 97)
    CHECK((fs.descriptors.col(i) - centre).lpNorm<1>() > 5.0);
}

TEST_CASE("compute_fpfh: block normalization and isolated points") {
  Eigen::Matrix3Xd pts = model_of("cube").cloud.points;
  Eigen::Matrix3Xd nrm = model_of("cube").cloud.normals;
  pts.conservativeResize(3, pts.cols() + 1);
  nrm.conservativeResize(3, nrm.cols() + 1);
  pts.col(pts.cols() - 1) = Eigen::Vector3d(5, 5, 5);
  nrm.col(nrm.cols() - 1) = Eigen::Vector3d::UnitZ();
  const PointCloudd c(pts, nrm);
  const auto fc = compute_fpfh(c, default_fpfh_radius(model_of("cube").cloud), 2);
  REQUIRE(fc.isolated == std::vector<Index>{c.size() - 1});
  CHECK(fc.descriptors.col(c.size() - 1).isZero());
  for (Index i = 0; i + 1 < c.size(); ++i)
    for (int b = 0; b < 3; ++b) CHECK(fc.descriptors.col(i).segment<11>(11 * b).sum() == doctest::Approx(100.0));
}

TEST_CASE("compute_fpfh: rigid invariance") {
  std::mt19937_64 rng(2);
  int clouds = 0;
  for (const auto& name : {"cube", "cylinder", "l_bracket", "screw", "sphere"}) {
    const PointCloudd& c = model_of(name).cloud;
    const double r = default_fpfh_radius(c);
    const auto before = compute_fpfh(c, r, 1);
    for (int k = 0; k < 2; ++k, ++clouds) {
      const auto after = compute_fpfh(apply_transform(random_pose(rng, 0.5), c), r, 1);
      CHECK((before.descriptors - after.descriptors).cwiseAbs().maxCoeff() < 1e-6);
    }
    // Re-estimated normals, oriented consistently.
    NormalOptions<double> opt;
    opt.orientation = NormalOrientation::kAwayFromCentroid;
    const PointCloudd re = estimate_normals(PointCloudd(c.points), opt);
    const auto pose = random_pose(rng, 0.5);
    const PointCloudd moved = estimate_normals(PointCloudd(pose.apply_points(c.points)), opt);
    const auto a = compute_fpfh(re, r, 1);
    const auto b = compute_fpfh(moved, r, 1);
    CHECK((a.descriptors - b.descriptors).cwiseAbs().maxCoeff() <= 0.5);
  }
  CHECK(clouds == 10);
}

TEST_CASE("compute_fpfh rejects bad input") {
  CHECK_THROWS_AS(compute_fpfh(PointCloudd(Eigen::Matrix3Xd::Zero(3, 4)), 0.1), InvalidArgument);
  CHECK_THROWS_AS(compute_fpfh(model_of("cube").cloud, 0.0), InvalidArgument);
  CHECK(compute_fpfh(PointCloudd(Eigen::Matrix3Xd(3, 0), Eigen::Matrix3Xd(3, 0)), 0.1).size() == 0);
}

TEST_CASE("match_features: self match, rigid copy, noise rejection, symmetry") {
  const auto& m = model_of("l_bracket");
  const double r = default_fpfh_radius(m.cloud);
  const auto obj = compute_fpfh(m.cloud, r, 1);

  const auto self = match_features(obj, obj, true);
  std::set<Index> unique;
  for (Index i = 0; i < obj.size(); ++i) {
    bool dup = false;
    for (Index j = 0; j < obj.size() && !dup; ++j)
      dup = j != i && obj.descriptors.col(i) == obj.descriptors.col(j);
    if (!dup) unique.insert(i);
  }
  Index matched_unique = 0;
  for (const auto& c : self.pairs) matched_unique += unique.count(c.scene) && c.scene == c.target;
  CHECK(matched_unique == static_cast<Index>(unique.size()));

  std::mt19937_64 rng(3);
  const auto gt = random_pose(rng, 0.3);
  const auto scene = compute_fpfh(apply_transform(gt, m.cloud), r, 1);
  const auto corr = match_features(scene, obj, true);
  REQUIRE(!corr.empty());
  Index good = 0;
  for (const auto& c : corr.pairs)
    good += (scene.cloud.point(c.scene) - gt.apply_point(m.cloud.point(c.target))).norm() <
            0.05 * m.diameter;
  CHECK(static_cast<double>(good) >= 0.8 * static_cast<double>(corr.size()));

  const auto swapped = match_features(obj, scene, true);
  REQUIRE(swapped.size() == corr.size());
  std::set<std::pair<Index, Index>> fwd, back;
  for (const auto& c : corr.pairs) fwd.insert({c.scene, c.target});
  for (const auto& c : swapped.pairs) back.insert({c.target, c.scene});
  CHECK(fwd == back);

  Eigen::Matrix3Xd noise = kpose::testing::random_points(rng, 2048, m.diameter / 2);
  const PointCloudd nc = estimate_normals(PointCloudd(noise), {});
  const auto noisy = compute_fpfh(nc, r, 1);
  const auto nm = match_features(noisy, obj, true);
  CHECK(static_cast<double>(nm.size()) < 0.2 * static_cast<double>(nc.size()));
  CHECK(match_features(noisy, obj, false).size() == nc.size());
}

TEST_CASE("write_feature_csv writes one row of 33 values per point") {
  const auto fc = compute_fpfh(plane_grid(5, 0.001), 0.0015, 1);
  const auto path = std::filesystem::temp_directory_path() / "kpose_features.csv";
  write_feature_csv(path, fc);
  std::ifstream in(path);
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) {
    CHECK(std::count(line.begin(), line.end(), ',') == 32);
    ++rows;
  }
  CHECK(rows == 25);
  std::filesystem::remove(path);
}
