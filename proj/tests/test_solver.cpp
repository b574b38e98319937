#include <random>

#include "doctest.h"
#include "kpose/core.hpp"
#include "kpose/metrics.hpp"
#include "kpose/sampling.hpp"
#include "kpose/shapes.hpp"
#include "kpose/solver.hpp"
#include "oracles.hpp"

using namespace kpose;
using kpose::testing::random_points;
using kpose::testing::random_pose;

namespace {

double rms(const RigidTransformd& t, const Eigen::Matrix3Xd& src, const Eigen::Matrix3Xd& dst) {
  return std::sqrt((t.apply_points(src) - dst).colwise().squaredNorm().mean());
}

const ObjectModel& bracket() {
  static const ObjectModel model = build_object_model(shapes::l_bracket(0.06, 0.035, 0.008, 0.03), 100, 5);
  return model;
}

// Keypoint correspondences against `scene = gt * model.cloud`; a fraction
// `inlier_ratio` is correct, the rest pair random scene points.
CorrespondenceSet synthetic_corr(const ObjectModel& model, double inlier_ratio, Index n,
                                 std::mt19937_64& rng) {
  std::uniform_int_distribution<Index> kp(0, model.keypoint_count() - 1);
  std::uniform_int_distribution<Index> pt(0, model.cloud.size() - 1);
  std::bernoulli_distribution good(inlier_ratio);
  CorrespondenceSet corr;
  for (Index i = 0; i < n; ++i) {
    const Index k = kp(rng);
    const Index scene = good(rng) ? model.keypoint_indices[static_cast<std::size_t>(k)] : pt(rng);
    corr.pairs.push_back({scene, k, 1.0});
  }
  return corr;
}

}  // namespace

TEST_CASE("kabsch: identity and exact recovery") {
  std::mt19937_64 rng(1);
  const Eigen::Matrix3Xd src = random_points(rng, 20);
  const auto id = kabsch(src, src);
  CHECK(id.rotation.isIdentity(1e-9));
  CHECK(id.translation.norm() < 1e-9);
  for (int trial = 0; trial < 200; ++trial) {
    const auto gt = random_pose(rng, 5.0);
    const auto est = kabsch(src, gt.apply_points(src));
    CHECK(rotation_distance(est, gt) < 1e-7);
    CHECK((est.translation - gt.translation).norm() < 1e-9 * std::max(1.0, gt.translation.norm()));
  }
}

TEST_CASE("kabsch is optimal against random perturbations") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> noise(0.0, 0.05);
  const Eigen::Matrix3Xd src = random_points(rng, 40);
  const auto gt = random_pose(rng);
  Eigen::Matrix3Xd dst = gt.apply_points(src);
  for (Index i = 0; i < dst.size(); ++i) dst.data()[i] += noise(rng);
  const auto est = kabsch(src, dst);
  const double best = rms(est, src, dst);
  std::normal_distribution<double> small(0.0, 0.02);
  for (int k = 0; k < 1000; ++k) {
    const Eigen::Vector3d axis(small(rng), small(rng), small(rng));
    const RigidTransformd perturb(
        Eigen::AngleAxisd(axis.norm(), axis.normalized()).toRotationMatrix(),
        Eigen::Vector3d(small(rng), small(rng), small(rng)));
    CHECK(best <= rms(perturb * est, src, dst));
  }
}

TEST_CASE("kabsch: weights, reflections and degenerate input") {
  std::mt19937_64 rng(3);
  const Eigen::Matrix3Xd src = random_points(rng, 10);
  const auto gt = random_pose(rng);
  Eigen::Matrix3Xd dst = gt.apply_points(src);
  dst.col(9) += Eigen::Vector3d(10, 10, 10);  // outlier with zero weight
  Eigen::VectorXd w = Eigen::VectorXd::Ones(10);
  w(9) = 0;
  CHECK(rotation_distance(kabsch(src, dst, &w), gt) < 1e-9);

  // Planar mirror image: best proper rotation still has det +1.
  Eigen::Matrix3Xd mirrored = src;
  mirrored.row(2) *= -1;
  const auto proper = kabsch(src, mirrored);
  CHECK(proper.rotation.determinant() == doctest::Approx(1.0));

  Eigen::Matrix3Xd line(3, 5);
  for (int i = 0; i < 5; ++i) line.col(i) = Eigen::Vector3d(1, 2, 3) * i;
  CHECK_THROWS_WITH_AS(kabsch(line, line), "degenerate configuration", DegenerateError);
  CHECK_THROWS_AS(kabsch(src.leftCols(2), dst.leftCols(2)), InvalidArgument);
  CHECK_FALSE(try_kabsch(src.leftCols(4), dst.leftCols(3)).has_value());
}

TEST_CASE("kabsch output is a proper rotation on fuzzed input") {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<Index> n(3, 12);
  for (int trial = 0; trial < 10000; ++trial) {
    const Eigen::Matrix3Xd src = random_points(rng, n(rng));
    const Eigen::Matrix3Xd dst = random_points(rng, src.cols());
    const auto t = try_kabsch(src, dst);
    if (!t) continue;
    CHECK(t->is_valid(1e-9));
  }
}

TEST_CASE("kabsch is left-equivariant") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Matrix3Xd src = random_points(rng, 8);
    const Eigen::Matrix3Xd dst = random_points(rng, 8);
    const auto q = random_pose(rng, 2.0);
    const auto a = kabsch(src, q.apply_points(dst));
    const auto b = q * kabsch(src, dst);
    CHECK((a.matrix() - b.matrix()).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("coarse-to-fine on perfect identity correspondences") {
  const auto& model = bracket();
  CorrespondenceSet corr;
  for (Index k = 0; k < model.keypoint_count(); ++k)
    corr.pairs.push_back({model.keypoint_indices[static_cast<std::size_t>(k)], k, 1.0});
  const auto est = ransac_coarse_to_fine(model.cloud, model, corr, {.n_hypotheses = 50, .seed = 1});
  CHECK(est.pose.matrix().isIdentity(1e-9));
  CHECK(est.inlier_fraction == 1.0);
  CHECK(est.stages.size() == 5);
  CHECK(est.refined);
}

TEST_CASE("coarse-to-fine recovers poses from 30% inliers") {
  const auto& model = bracket();
  std::mt19937_64 rng(6);
  int ok = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto gt = random_pose(rng, 0.2);
    const auto scene = apply_transform(gt, model.cloud);
    const auto corr = synthetic_corr(model, 0.3, 600, rng);
    const auto est = ransac_coarse_to_fine(scene, model, corr, {.seed = static_cast<std::uint64_t>(trial)});
    ok += adi_metric(est.pose, gt, model.cloud) < 0.05 * model.diameter;
  }
  CHECK(ok >= 19);
}

TEST_CASE("normal gate rejects backside matches") {
  const auto& model = bracket();
  std::mt19937_64 rng(7);
  const auto gt = random_pose(rng, 0.2);
  auto scene = apply_transform(gt, model.cloud);
  scene.normals = -scene.normals;
  CorrespondenceSet corr;
  for (Index k = 0; k < model.keypoint_count(); ++k)
    corr.pairs.push_back({model.keypoint_indices[static_cast<std::size_t>(k)], k, 1.0});
  const auto est = ransac_coarse_to_fine(scene, model, corr, {.seed = 3});
  CHECK(est.inlier_count == 0);
  CHECK(est.stages.front().inlier_count == 0);
  CHECK_FALSE(est.refined);
  // Without the gate the same set is trivially solvable.
  const auto ungated = ransac_coarse_to_fine(scene, model, corr, {.normal_gate = false, .seed = 3});
  CHECK(ungated.inlier_fraction == 1.0);
}

TEST_CASE("hypothesis scoring is independent of the worker count") {
  const auto& model = bracket();
  std::mt19937_64 rng(8);
  const auto gt = random_pose(rng, 0.2);
  const auto scene = apply_transform(gt, model.cloud);
  const auto corr = synthetic_corr(model, 0.2, 1000, rng);
  const auto pairs = pair_keypoints(scene, model, corr);
  RansacConfig cfg{.seed = 11, .workers = 1};
  const auto one = generate_hypotheses(pairs, 0.1 * model.diameter, model.diameter, cfg);
  for (unsigned w : {2u, 3u, 8u}) {
    cfg.workers = w;
    const auto many = generate_hypotheses(pairs, 0.1 * model.diameter, model.diameter, cfg);
    REQUIRE(many.size() == one.size());
    for (std::size_t i = 0; i < one.size(); ++i) {
      CHECK(many[i].inliers == one[i].inliers);
      CHECK(many[i].pose.matrix() == one[i].pose.matrix());
    }
    CHECK(select_best(many) == select_best(one));
  }
}

TEST_CASE("select_best tie-break: inliers, then rms, then index") {
  std::vector<Hypothesis> h(4);
  h[0].inliers = -1;
  h[1] = {RigidTransformd{}, 5, 0.3};
  h[2] = {RigidTransformd{}, 5, 0.2};
  h[3] = {RigidTransformd{}, 5, 0.2};
  CHECK(select_best(h) == 2);
  h[3].inliers = 6;
  CHECK(select_best(h) == 3);
  CHECK(select_best(std::vector<Hypothesis>(3)) == -1);
}

TEST_CASE("ransac rejects bad input") {
  const auto& model = bracket();
  CorrespondenceSet two{{{0, 0, 1.0}, {1, 1, 1.0}}};
  CHECK_THROWS_AS(ransac_coarse_to_fine(model.cloud, model, two, {}), InvalidArgument);
  CorrespondenceSet bad{{{0, 0, 1.0}, {1, 1, 1.0}, {2, 999, 1.0}}};
  CHECK_THROWS_AS(ransac_coarse_to_fine(model.cloud, model, bad, {}), InvalidArgument);
  RansacConfig cfg;
  cfg.shrink_divisors = {2, 2};
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
  cfg = {};
  cfg.n_hypotheses = 0;
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
}

TEST_CASE("icp_refine: fixed point, max_iter 0, basin of attraction") {
  const auto& model = bracket();
  std::mt19937_64 rng(9);
  const double d = 0.1 * model.diameter;
  for (int trial = 0; trial < 10; ++trial) {
    const auto gt = random_pose(rng, 0.3);
    const auto scene = apply_transform(gt, model.cloud);

    const auto fixed = icp_refine(scene, model.cloud, gt, 30, d);
    CHECK((fixed.pose.matrix() - gt.matrix()).cwiseAbs().maxCoeff() < 1e-8);

    const Eigen::Vector3d axis = random_points(rng, 1).col(0).normalized();
    const Eigen::Vector3d shift = random_points(rng, 1).col(0).normalized() * 0.02 * model.diameter;
    const RigidTransformd init =
        RigidTransformd(Eigen::AngleAxisd(5.0 * M_PI / 180.0, axis).toRotationMatrix(), shift) * gt;
    const auto zero = icp_refine(scene, model.cloud, init, 0, d);
    CHECK(zero.pose.matrix() == init.matrix());

    const auto icp = icp_refine(scene, model.cloud, init, 100, d);
    CHECK(icp.converged);
    CHECK(adi_metric(icp.pose, gt, model.cloud) < 0.005 * model.diameter);
    for (std::size_t i = 1; i < icp.rms_history.size(); ++i)
      CHECK(icp.rms_history[i] <= icp.rms_history[i - 1]);
  }
}

TEST_CASE("icp_refine returns init when nothing pairs") {
  const auto& model = bracket();
  const auto far = RigidTransformd::Translation(Eigen::Vector3d(10, 0, 0));
  const auto icp = icp_refine(model.cloud, model.cloud, far, 30, 0.01);
  CHECK(icp.no_pairs);
  CHECK(icp.pose.matrix() == far.matrix());
}
