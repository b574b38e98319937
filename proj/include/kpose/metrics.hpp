#pragma once

#include <span>
#include <string>

#include "kpose/core/point_cloud.hpp"
#include "kpose/core/rigid_transform.hpp"

namespace kpose {

/// Correctness threshold: ADI <= kDefaultAdiThreshold * diameter.
inline constexpr double kDefaultAdiThreshold = 0.10;

/// Mean distance between identically indexed model points.
double add_metric(const RigidTransformd& est, const RigidTransformd& gt,
                  const PointCloudd& model_cloud);

/// Mean distance from each estimated model point to the nearest
/// ground-truth model point. Never exceeds add_metric for the same input.
double adi_metric(const RigidTransformd& est, const RigidTransformd& gt,
                  const PointCloudd& model_cloud);

struct EvalResult {
  std::string object_id;
  std::string scene_id;
  double adi = 0;
  double add = 0;
  bool correct = false;
};

/// Computes both metrics and the verdict adi <= tau * diameter.
EvalResult evaluate_pose(const RigidTransformd& est, const RigidTransformd& gt,
                         const PointCloudd& model_cloud, double diameter,
                         double tau = kDefaultAdiThreshold);

/// Fraction of correct results; throws on an empty list.
double recall(std::span<const EvalResult> results);

}  // namespace kpose
