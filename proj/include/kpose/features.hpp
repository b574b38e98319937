#pragma once

#include <filesystem>
#include <vector>

#include <Eigen/Core>

#include "kpose/correspondence.hpp"
#include "kpose/core/point_cloud.hpp"

namespace kpose {

inline constexpr int kFpfhBinsPerFeature = 11;
inline constexpr int kFpfhBins = 3 * kFpfhBinsPerFeature;

using FpfhDescriptor = Eigen::Matrix<double, kFpfhBins, 1>;
using FpfhMatrix = Eigen::Matrix<double, kFpfhBins, Eigen::Dynamic>;

/// Descriptor blocks are laid out [theta | alpha | phi], each block
/// normalized to sum to 100.
struct FeatureCloud {
  PointCloudd cloud;
  FpfhMatrix descriptors;
  /// Points without radius neighbors; their descriptor is all zeros.
  std::vector<Index> isolated;

  Index size() const { return cloud.size(); }
};

/// The Darboux-frame angles for an oriented point pair. The source is the
/// point whose normal makes the smaller angle with the connecting line.
struct PairFeatures {
  double theta;  // atan2(w . n_t, u . n_t), in [-pi, pi]
  double alpha;  // v . n_t, in [-1, 1]
  double phi;    // u . (p_t - p_s) / d, in [-1, 1]
  double distance;
};

PairFeatures pair_features(const Eigen::Vector3d& p1, const Eigen::Vector3d& n1,
                           const Eigen::Vector3d& p2, const Eigen::Vector3d& n2);

/// FPFH_p = SPFH_p + (1/k) sum_q SPFH_q / |p - q| over radius neighbors,
/// renormalized per block. Requires normals.
FeatureCloud compute_fpfh(const PointCloudd& c, double radius, unsigned workers = 0);

/// Radius heuristic: five times the mean nearest-neighbor spacing.
double default_fpfh_radius(const PointCloudd& object_cloud);

/// Nearest object descriptor (L2) for every scene point; with `mutual` the
/// pair survives only when the object point's nearest scene descriptor is
/// the query. Targets index `object.cloud`.
CorrespondenceSet match_features(const FeatureCloud& scene, const FeatureCloud& object,
                                 bool mutual = true);

void write_feature_csv(const std::filesystem::path& path, const FeatureCloud& features);

}  // namespace kpose
