#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "kpose/correspondence.hpp"
#include "kpose/core/point_cloud.hpp"
#include "kpose/core/rigid_transform.hpp"
#include "kpose/sampling.hpp"
#include "kpose/solver/kabsch.hpp"

namespace kpose {

struct FeatureCloud;

struct RansacConfig {
  int n_hypotheses = 1000;
  /// Absolute coarse inlier distance; <= 0 means
  /// inlier_diameter_fraction * object diameter.
  double inlier_distance = 0;
  double inlier_diameter_fraction = 0.10;
  double normal_angle_max_deg = 30;
  bool normal_gate = true;
  std::vector<double> shrink_divisors{2, 3, 4, 5};
  std::uint64_t seed = 0;
  unsigned workers = 0;  // 0: hardware concurrency
  int icp_max_iter = 30;

  double resolve_inlier_distance(double diameter) const {
    return inlier_distance > 0 ? inlier_distance : inlier_diameter_fraction * diameter;
  }
  /// Throws InvalidArgument when a field is out of range.
  void validate() const;
};

struct StageStats {
  double inlier_distance = 0;
  Index inlier_count = 0;
};

struct PoseEstimate {
  RigidTransformd pose;
  Index inlier_count = 0;
  double inlier_fraction = 0;
  bool refined = false;
  /// Coarse stage first, then one entry per refinement distance.
  std::vector<StageStats> stages;
};

/// Resolved correspondence geometry: column i pairs a model-frame source
/// point with the scene point it should land on.
struct PairedPoints {
  Eigen::Matrix3Xd src, src_normals;
  Eigen::Matrix3Xd dst, dst_normals;

  Index size() const { return src.cols(); }
  bool has_normals() const { return src_normals.cols() == src.cols() && dst_normals.cols() == dst.cols(); }
};

/// Pairs where `target` indexes model keypoints.
PairedPoints pair_keypoints(const PointCloudd& scene, const ObjectModel& model,
                            const CorrespondenceSet& corr);
/// Pairs where `target` indexes points of `object`.
PairedPoints pair_points(const PointCloudd& scene, const PointCloudd& object,
                         const CorrespondenceSet& corr);

struct Hypothesis {
  RigidTransformd pose;
  Index inliers = -1;  // -1: no valid triplet was found
  double rms = 0;
};

/// Draws and scores cfg.n_hypotheses triplet poses. The per-hypothesis
/// generator is derived from (cfg.seed, index), so the result does not
/// depend on cfg.workers.
std::vector<Hypothesis> generate_hypotheses(const PairedPoints& pairs, double inlier_distance,
                                            double diameter, const RansacConfig& cfg);

/// Best by (more inliers, lower rms, lower index); -1 when none is valid.
Index select_best(const std::vector<Hypothesis>& hyps);

/// Inlier count and rms of `pose` at `inlier_distance`; `mask` receives
/// the per-pair decision when non-null.
Hypothesis score_pose(const PairedPoints& pairs, const RigidTransformd& pose, double inlier_distance,
                      const RansacConfig& cfg, std::vector<char>* mask = nullptr);

/// Triplet RANSAC over keypoint correspondences with a normal-angle gate,
/// then Kabsch refits on the inliers at the coarse distance and at each
/// distance / divisor.
PoseEstimate ransac_coarse_to_fine(const PointCloudd& scene, const ObjectModel& model,
                                   const CorrespondenceSet& corr, const RansacConfig& cfg);
PoseEstimate ransac_coarse_to_fine(const PairedPoints& pairs, double diameter,
                                   const RansacConfig& cfg);

/// Single-distance triplet RANSAC with one Kabsch refit on the inliers.
PoseEstimate ransac_single_stage(const PairedPoints& pairs, double diameter, const RansacConfig& cfg);

struct IcpResult {
  RigidTransformd pose;
  int iterations = 0;
  std::vector<double> rms_history;  // truncated pairing rms per accepted iteration
  bool converged = false;
  bool no_pairs = false;  // nothing within range at init: pose == init
};

/// Point-to-point ICP: pair each transformed model point with its nearest
/// scene point within `inlier_distance`, refit with Kabsch, repeat until the
/// pairing is unchanged or `max_iter`. An iteration that would raise the
/// pairing rms is rejected and ends the loop.
IcpResult icp_refine(const PointCloudd& scene, const PointCloudd& model_cloud,
                     const RigidTransformd& init, int max_iter, double inlier_distance);

/// Descriptor matching, single-stage RANSAC, then ICP on the full clouds.
PoseEstimate ransac_classic(const FeatureCloud& scene, const FeatureCloud& object,
                            const RansacConfig& cfg, bool mutual_filter = true);
/// Single-stage RANSAC without the normal gate, then ICP of model_cloud
/// against scene at the inlier distance.
PoseEstimate ransac_classic(const PairedPoints& pairs, const PointCloudd& scene,
                            const PointCloudd& model_cloud, double diameter, const RansacConfig& cfg);

/// Single-stage RANSAC + ICP on already-extracted keypoint correspondences.
PoseEstimate ransac_classic(const PointCloudd& scene, const ObjectModel& model,
                            const CorrespondenceSet& corr, const RansacConfig& cfg);

}  // namespace kpose
