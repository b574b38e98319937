#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include <Eigen/Core>

#include "kpose/correspondence.hpp"
#include "kpose/core/point_cloud.hpp"
#include "kpose/core/rigid_transform.hpp"
#include "kpose/sampling.hpp"

namespace kpose {

/// Emulated network output for one scene.
struct MatchPrediction {
  Eigen::VectorXd seg_prob;         // |scene|
  Eigen::MatrixXd keypoint_scores;  // |scene| x K, rows sum to 1

  Index size() const { return seg_prob.size(); }
  Index keypoint_count() const { return keypoint_scores.cols(); }
};

struct OracleSpec {
  double seg_accuracy = 0.96;
  double keypoint_accuracy = 0.31;
  double temperature = 0.05;  // fraction of the diameter
  std::uint64_t seed = 0;

  void validate() const;
};

/// Rotations about the object centroid that map the sampled surface onto
/// itself, identity first.
struct SymmetryGroup {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  std::vector<Eigen::Matrix3d> rotations{Eigen::Matrix3d::Identity()};

  Index order() const { return static_cast<Index>(rotations.size()); }
};

inline constexpr Index kMaxSymmetryOrder = 120;

/// Tests rotations by 2π/n, n in {2,3,4,5,6,8,12}, about the principal axes
/// and a set of surface normal directions, then closes the accepted set
/// under composition (capped at kMaxSymmetryOrder).
SymmetryGroup detect_symmetries(const ObjectModel& model);

/// Per-model data reused across scenes.
struct OracleTable {
  Eigen::Matrix3Xd keypoints;
  /// Column g*K + j is rotation g applied to keypoint j about the center.
  Eigen::Matrix3Xd orbit;
  SymmetryGroup symmetry;
  double diameter = 0;

  static OracleTable build(const ObjectModel& model);
  static OracleTable build(const ObjectModel& model, SymmetryGroup symmetry);

  Index keypoint_count() const { return keypoints.cols(); }
  /// Symmetry-aware distance from a model-frame point to every keypoint.
  Eigen::VectorXd distances(const Eigen::Vector3d& x) const;
  /// Index of the geometrically nearest keypoint (lowest index on ties).
  Index nearest_keypoint(const Eigen::Vector3d& x) const;
  /// Keypoint with the smallest symmetry-aware distance (lowest index on
  /// ties): the label a prediction is scored against.
  Index true_keypoint(const Eigen::Vector3d& x) const;
};

/// softmax(-d / (temperature * diameter)) computed stably.
Eigen::VectorXd score_row(const Eigen::VectorXd& distances, double temperature, double diameter);

MatchPrediction oracle_predict(const PointCloudd& scene, const ObjectModel& model,
                               const RigidTransformd& gt_pose,
                               const std::vector<bool>& instance_mask, const OracleSpec& spec);
MatchPrediction oracle_predict(const PointCloudd& scene, const OracleTable& table,
                               const RigidTransformd& gt_pose,
                               const std::vector<bool>& instance_mask, const OracleSpec& spec);

/// Points with seg_prob >= 0.5 vote for every keypoint scoring at least
/// vote_threshold times the row maximum. Pair weight is the score.
CorrespondenceSet extract_correspondences(const MatchPrediction& pred, double vote_threshold);

/// Fraction of masked rows whose argmax is the true keypoint.
double keypoint_top1_accuracy(const MatchPrediction& pred, const std::vector<Index>& true_keypoint,
                              const std::vector<bool>& mask);

void write_prediction_csv(std::ostream& out, const MatchPrediction& pred);
void write_correspondence_csv(std::ostream& out, const CorrespondenceSet& corr);

}  // namespace kpose
