#include <random>

#include "doctest.h"
#include "kpose/core.hpp"
#include "kpose/sampling.hpp"
#include "kpose/shapes.hpp"
#include "oracles.hpp"

using namespace kpose;
using kpose::testing::random_points;
using kpose::testing::random_pose;

TEST_CASE("apply_transform: identity, inverse and axis rotation") {
  std::mt19937_64 rng(7);
  PointCloudd c(random_points(rng, 40));
  c = estimate_normals(c, {.k = 8});

  const auto same = apply_transform(RigidTransformd::Identity(), c);
  CHECK(same.points == c.points);
  CHECK(same.normals == c.normals);

  const auto t = random_pose(rng, 3.0);
  const auto back = apply_transform(t.inverse(), apply_transform(t, c));
  CHECK((back.points - c.points).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((back.normals - c.normals).cwiseAbs().maxCoeff() < 1e-9);

  const auto rz = RigidTransformd::AxisAngle(M_PI / 2, Eigen::Vector3d::UnitZ());
  CHECK((rz.apply_point(Eigen::Vector3d::UnitX()) - Eigen::Vector3d::UnitY()).norm() < 1e-15);
}

TEST_CASE("apply_transform preserves pairwise distances and normal length") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    PointCloudd c(random_points(rng, 30, 5.0));
    c = estimate_normals(c, {.k = 6});
    const auto t = random_pose(rng, 10.0);
    const auto m = apply_transform(t, c);
    for (Index i = 0; i < c.size(); ++i) {
      CHECK(std::abs(m.normals.col(i).norm() - 1.0) < 1e-12);
      for (Index j = i + 1; j < c.size(); ++j) {
        const double d0 = (c.points.col(i) - c.points.col(j)).norm();
        const double d1 = (m.points.col(i) - m.points.col(j)).norm();
        CHECK(std::abs(d0 - d1) <= 1e-9 * d0);
      }
    }
  }
}

TEST_CASE("RigidTransform composition is associative and closed") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const auto a = random_pose(rng), b = random_pose(rng), c = random_pose(rng);
    const auto left = (a * b) * c;
    const auto right = a * (b * c);
    CHECK((left.matrix() - right.matrix()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(left.is_valid());
    CHECK((a * a.inverse()).matrix().isIdentity(1e-12));
  }
}

TEST_CASE("KdTree rejects empty input") {
  CHECK_THROWS_WITH_AS(KdTreed(Eigen::Matrix3Xd(3, 0)), "empty input", InvalidArgument);
}

TEST_CASE("KdTree knn(k=1) of each point of a 3-point cloud is the point itself") {
  Eigen::Matrix3Xd pts(3, 3);
  pts << 0, 1, 0,  //
      0, 0, 2,     //
      0, 0, 0;
  const KdTreed tree(pts);
  for (Index i = 0; i < 3; ++i) {
    const auto nn = tree.knn(pts.col(i), 1);
    REQUIRE(nn.size() == 1);
    CHECK(nn[0].index == i);
    CHECK(nn[0].squared_distance == 0.0);
  }
}

TEST_CASE("KdTree matches brute force on random clouds, ties to lower index") {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<Index> size(1, 500);
  for (int cloud = 0; cloud < 50; ++cloud) {
    Eigen::Matrix3Xd pts = random_points(rng, size(rng));
    // Duplicate a few points and snap some to a coarse grid to force ties.
    if (pts.cols() > 10) {
      pts.col(1) = pts.col(0);
      pts.col(5) = pts.col(0);
      for (Index i = 0; i < pts.cols(); i += 3) pts.col(i) = (pts.col(i) * 4).array().round() / 4;
    }
    const KdTreed tree(pts, 4);
    for (int q = 0; q < 20; ++q) {
      const Eigen::Vector3d query =
          q % 2 ? Eigen::Vector3d(pts.col(q % pts.cols())) : Eigen::Vector3d(random_points(rng, 1));
      for (Index k : {1, 5, 17}) {
        std::vector<Index> got;
        for (const auto& n : tree.knn(query, k)) got.push_back(n.index);
        CHECK(got == kpose::testing::brute_knn(pts, query, k));
      }
      const double r = 0.4;
      std::vector<Index> got;
      for (const auto& n : tree.radius(query, r)) got.push_back(n.index);
      CHECK(got == kpose::testing::brute_radius(pts, query, r));
    }
  }
}

TEST_CASE("KdTree radius 0 returns only coincident points") {
  Eigen::Matrix3Xd pts(3, 4);
  pts << 0, 1, 0, 0,  //
      0, 0, 0, 1e-9,  //
      0, 0, 0, 0;
  const KdTreed tree(pts);
  const auto hits = tree.radius(Eigen::Vector3d::Zero(), 0.0);
  REQUIRE(hits.size() == 2);
  CHECK(hits[0].index == 0);
  CHECK(hits[1].index == 2);
}

TEST_CASE("KdTree nearest_within agrees with brute force under a distance bound") {
  std::mt19937_64 rng(77);
  Eigen::Matrix3Xd pts = random_points(rng, 500);
  for (Index i = 0; i < pts.cols(); i += 2) pts.col(i) = (pts.col(i) * 4).array().round() / 4;
  const KdTreed tree(pts);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int q = 0; q < 300; ++q) {
    const Eigen::Vector3d x(u(rng), u(rng), u(rng));
    const double bound = 0.05 * (q % 20);
    Index bi = -1;
    double bd = bound;
    for (Index i = 0; i < pts.cols(); ++i) {
      const double d2 = (pts.col(i) - x).squaredNorm();
      if (d2 < bd || (d2 == bd && (bi < 0 || i < bi))) {
        bi = i;
        bd = d2;
      }
    }
    const auto nb = tree.nearest_within(x, bound);
    CHECK(nb.index == bi);
    if (bi >= 0) CHECK(nb.squared_distance == doctest::Approx(bd));
  }
}

TEST_CASE("estimate_normals on a plane gives +-z") {
  std::mt19937_64 rng(5);
  Eigen::Matrix3Xd pts = random_points(rng, 300);
  pts.row(2).setZero();
  const auto c = estimate_normals(PointCloudd(pts), {.k = 30, .viewpoint = {0, 0, 5}});
  for (Index i = 0; i < c.size(); ++i) {
    CHECK(std::abs(std::abs(c.normals(2, i)) - 1.0) < 1e-6);
    CHECK(c.normals(2, i) > 0);  // oriented toward the viewpoint above
  }
}

TEST_CASE("estimate_normals on a sphere points radially outward") {
  const auto pts = kpose::testing::fibonacci_sphere(2000);
  const auto c = estimate_normals(PointCloudd(pts),
                                  {.k = 30, .orientation = NormalOrientation::kAwayFromCentroid});
  for (Index i = 0; i < c.size(); ++i) CHECK(c.normals.col(i).dot(pts.col(i).normalized()) > 0.9);
}

TEST_CASE("estimate_normals is rigid-equivariant") {
  std::mt19937_64 rng(9);
  const auto model = build_object_model(shapes::cylinder(0.02, 0.05), 10, 3);
  PointCloudd base(model.cloud.points);
  const auto n0 = estimate_normals(base, {.orientation = NormalOrientation::kAwayFromCentroid});
  for (int trial = 0; trial < 5; ++trial) {
    const auto t = random_pose(rng, 0.5);
    const auto n1 = estimate_normals(apply_transform(t, base),
                                     {.orientation = NormalOrientation::kAwayFromCentroid});
    double worst = 0;
    for (Index i = 0; i < base.size(); ++i) {
      const Eigen::Vector3d expected = t.rotation * n0.normals.col(i);
      const double c = std::min(1.0, std::abs(expected.dot(n1.normals.col(i))));
      worst = std::max(worst, std::acos(c));
    }
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("estimate_normals flags coincident neighborhoods") {
  Eigen::Matrix3Xd pts = Eigen::Matrix3Xd::Zero(3, 40);
  pts.rightCols(5).setRandom();
  std::vector<Index> degenerate;
  const auto c = estimate_normals(PointCloudd(pts), {.k = 30}, &degenerate);
  CHECK(degenerate.size() == 35);
  CHECK(c.normals.col(0) == Eigen::Vector3d::UnitZ());
  CHECK_THROWS_AS(estimate_normals(PointCloudd(pts), {.k = 2}), InvalidArgument);
}

TEST_CASE("diameter: single point, cube corners, sampled object") {
  CHECK(diameter(PointCloudd(Eigen::Matrix3Xd::Ones(3, 1))) == 0.0);
  Eigen::Matrix3Xd corners(3, 8);
  for (int i = 0; i < 8; ++i) corners.col(i) << (i & 1), (i >> 1) & 1, (i >> 2) & 1;
  CHECK(diameter(PointCloudd(corners)) == doctest::Approx(std::sqrt(3.0)).epsilon(1e-15));

  const auto cloud = poisson_sample(shapes::l_bracket(0.06, 0.035, 0.008, 0.03), 2048, 4);
  const double oracle = kpose::testing::brute_diameter(cloud.points);
  CHECK(std::abs(diameter(cloud) - oracle) <= 0.01 * oracle);
}

TEST_CASE("diameter of large clouds stays within 1% of brute force") {
  std::mt19937_64 rng(1);
  const Eigen::Matrix3Xd pts = kpose::testing::fibonacci_sphere(5000, 2.0);
  const double oracle = kpose::testing::brute_diameter(pts);
  CHECK(std::abs(diameter(PointCloudd(pts)) - oracle) <= 0.01 * oracle);
}
