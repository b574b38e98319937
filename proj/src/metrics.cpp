#include "kpose/metrics.hpp"

#include <cmath>

#include "kpose/core/error.hpp"
#include "kpose/core/kd_tree.hpp"

namespace kpose {
namespace {

struct Distances {
  double add = 0;
  double adi = 0;
};

// Both metrics from the same transformed matrices so the per-point nearest
// distance can never exceed the identity-pairing distance.
Distances both_metrics(const RigidTransformd& est, const RigidTransformd& gt,
                       const PointCloudd& model_cloud) {
  Distances d;
  const Index n = model_cloud.size();
  if (n == 0) return d;
  const Eigen::Matrix3Xd moved_est = est.apply_points(model_cloud.points);
  const Eigen::Matrix3Xd moved_gt = gt.apply_points(model_cloud.points);
  const KdTreed tree(moved_gt);
  for (Index i = 0; i < n; ++i) {
    d.add += std::sqrt((moved_gt.col(i) - moved_est.col(i)).squaredNorm());
    d.adi += std::sqrt(tree.nearest(moved_est.col(i)).squared_distance);
  }
  d.add /= static_cast<double>(n);
  d.adi /= static_cast<double>(n);
  return d;
}

}  // namespace

double add_metric(const RigidTransformd& est, const RigidTransformd& gt,
                  const PointCloudd& model_cloud) {
  const Index n = model_cloud.size();
  if (n == 0) return 0;
  const Eigen::Matrix3Xd moved_est = est.apply_points(model_cloud.points);
  const Eigen::Matrix3Xd moved_gt = gt.apply_points(model_cloud.points);
  double sum = 0;
  for (Index i = 0; i < n; ++i) sum += std::sqrt((moved_gt.col(i) - moved_est.col(i)).squaredNorm());
  return sum / static_cast<double>(n);
}

double adi_metric(const RigidTransformd& est, const RigidTransformd& gt,
                  const PointCloudd& model_cloud) {
  return both_metrics(est, gt, model_cloud).adi;
}

EvalResult evaluate_pose(const RigidTransformd& est, const RigidTransformd& gt,
                         const PointCloudd& model_cloud, double diameter, double tau) {
  const Distances d = both_metrics(est, gt, model_cloud);
  if (d.adi > d.add) throw std::logic_error("ADI exceeded ADD");
  EvalResult r;
  r.adi = d.adi;
  r.add = d.add;
  r.correct = d.adi <= tau * diameter;
  return r;
}

double recall(std::span<const EvalResult> results) {
  if (results.empty()) throw InvalidArgument("recall of an empty result list");
  Index correct = 0;
  for (const auto& r : results) correct += r.correct;
  return static_cast<double>(correct) / static_cast<double>(results.size());
}

}  // namespace kpose
