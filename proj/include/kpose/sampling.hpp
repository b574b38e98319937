#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "kpose/core/mesh.hpp"
#include "kpose/core/normals.hpp"
#include "kpose/core/point_cloud.hpp"

namespace kpose {

/// Object clouds always carry this many surface points.
inline constexpr Index kObjectCloudSize = 2048;
inline constexpr Index kDefaultKeypoints = 100;

/// Sampled object surface, its keypoint subset and its diameter.
struct ObjectModel {
  PointCloudd cloud;
  std::vector<Index> keypoint_indices;
  double diameter = 0;
  std::uint64_t seed = 0;

  Index keypoint_count() const { return static_cast<Index>(keypoint_indices.size()); }
  Eigen::Matrix3Xd keypoints() const;
  Eigen::Matrix3Xd keypoint_normals() const;

  /// Throws InvalidArgument when an invariant is broken.
  void validate() const;
};

struct NoiseSpec {
  double sigma_fraction = 0;  // Gaussian std as a fraction of the diameter
  std::uint64_t seed = 0;
};

/// Even surface sampling: area-weighted uniform oversampling (8n) followed
/// by weighted sample elimination down to exactly n points. Normals are the
/// face normals of the source triangles.
PointCloudd poisson_sample(const TriangleMesh& mesh, Index n, std::uint64_t seed);

/// Ideal hexagonal packing radius sqrt(area / (2 sqrt(3) n)).
double packing_radius(double area, Index n);

struct FpsTrace {
  std::vector<Index> indices;
  /// Distance from each newly selected point to the previously selected
  /// set; the first entry is +inf.
  std::vector<double> gaps;
  /// Largest distance from any cloud point to the final selection.
  double covering_radius = 0;
};

/// Greedy farthest point sampling. The first index comes from a seeded
/// uniform draw; ties go to the lower index.
FpsTrace farthest_point_sample_trace(const PointCloudd& c, Index k, std::uint64_t seed);
std::vector<Index> farthest_point_sample(const PointCloudd& c, Index k, std::uint64_t seed);

/// Per-coordinate Gaussian jitter with std sigma_fraction * diameter; normals
/// are re-estimated afterwards using `normals`. sigma_fraction == 0 returns
/// the input unchanged.
PointCloudd add_noise(const PointCloudd& c, const NoiseSpec& spec, double diameter,
                      const NormalOptions<double>& normals = {});

/// Samples kObjectCloudSize surface points, orients their normals outward,
/// measures the diameter and picks `k_keypoints` by farthest point sampling.
ObjectModel build_object_model(const TriangleMesh& mesh, Index k_keypoints,
                               std::uint64_t seed);

}  // namespace kpose
