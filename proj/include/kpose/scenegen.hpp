#pragma once

#include <cstdint>
#include <vector>

#include "kpose/core/point_cloud.hpp"
#include "kpose/core/rigid_transform.hpp"
#include "kpose/sampling.hpp"

namespace kpose {

inline constexpr int kMaxInstances = 20;
inline constexpr Index kSceneCloudSize = 2048;
inline constexpr double kDefaultPixelAngle = 0.2 * M_PI / 180.0;

/// Open box with its floor at z = 0 and the opening at z = height, centred
/// on the z axis. `camera` maps camera coordinates into the bin frame; the
/// camera looks along its +z axis.
struct BinSpec {
  double width = 0.35;   // x
  double depth = 0.25;   // y
  double height = 0.20;  // z
  double wall = 0.01;
  double surface_spacing = 0.002;  // grid step of the sampled inner surface
  double pixel_angle = kDefaultPixelAngle;
  RigidTransformd camera = default_camera(0.20 + 0.45);

  /// Camera at (0, 0, z) looking straight down.
  static RigidTransformd default_camera(double z);

  void validate() const;
  /// Grid points on the floor and the four inner walls with inward normals,
  /// in the bin frame.
  PointCloudd surface_cloud() const;
  /// Distance from a bin-frame point to the nearest inner surface.
  double distance_to_surface(const Eigen::Vector3d& p) const;
};

/// Visible scene in camera coordinates.
struct BinScene {
  PointCloudd cloud;
  std::vector<RigidTransformd> poses;  // model -> camera
};

/// Places n instances with uniform random rotations and positions so that
/// bounding spheres stay inside the walls and separated by at least
/// 0.8 (ri + rj). After 1000 failed draws an instance is stacked above the
/// others. The union of bin surface and instance clouds is then filtered
/// for visibility from the camera.
BinScene sample_bin_scene(const ObjectModel& model, const BinSpec& bin, int n_instances,
                          std::uint64_t seed);

/// Bounding sphere radius of the model about its centroid.
double bounding_radius(const ObjectModel& model);

/// Indices of points seen from `camera` (camera -> cloud frame) through an
/// angular z-buffer with cells of pixel_angle. Each point covers a 3x3
/// block of cells; a point survives when it lies within a depth band of
/// the nearest depth in its cell. Points whose normal faces away from the
/// camera are culled when normals are present.
std::vector<Index> visible_indices(const PointCloudd& cloud, const RigidTransformd& camera,
                                   double pixel_angle);
PointCloudd visibility_filter(const PointCloudd& cloud, const RigidTransformd& camera,
                              double pixel_angle);

/// Training/evaluation sample around one randomly chosen object point.
struct SceneSample {
  PointCloudd cloud;                        // centered, kSceneCloudSize points
  std::vector<bool> instance_mask;
  RigidTransformd gt_pose;                  // target instance, centered frame
  std::vector<RigidTransformd> all_poses;   // centered frame
  int n_instances = 0;
  int target_instance = 0;
  Eigen::Vector3d viewpoint = Eigen::Vector3d::Zero();  // camera, centered frame
  std::uint64_t seed = 0;
};

/// Removes bin points (closer than twice the model spacing to the known bin
/// surface), picks a random object point, keeps everything within one
/// model diameter, centers on the picked point and resamples to exactly
/// kSceneCloudSize points. Ownership of each point goes to the instance
/// with the nearest transformed model point, if within three spacings.
SceneSample crop_and_center(const BinScene& scene, const ObjectModel& model, const BinSpec& bin,
                            std::uint64_t seed);

/// sample_bin_scene followed by crop_and_center with derived seeds.
SceneSample generate_scene(const ObjectModel& model, const BinSpec& bin, int n_instances,
                           std::uint64_t seed);

/// Instance count used for the i-th scene of a dataset: 1, 2, ..., 20, 1, ...
int instance_count_for(Index scene_index);

}  // namespace kpose
