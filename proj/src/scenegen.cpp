#include "kpose/scenegen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "kpose/core/error.hpp"
#include "kpose/core/geometry.hpp"
#include "kpose/core/kd_tree.hpp"
#include "kpose/core/random.hpp"

namespace kpose {
namespace {

constexpr int kMaxPlacementTries = 1000;
constexpr double kSeparationFactor = 0.8;
constexpr double kDepthBandCells = 3.0;
constexpr double kBinMarginSpacings = 2.0;
constexpr double kOwnershipSpacings = 3.0;

double uniform_in(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform_unit(rng); }

std::uint64_t cell_key(long long i, long long j) {
  return (static_cast<std::uint64_t>(i + (1ll << 31)) << 32) |
         static_cast<std::uint64_t>(j + (1ll << 31));
}

// Distance from p to the axis-aligned rectangle lo..hi (one extent is flat).
double rect_distance(const Eigen::Vector3d& p, const Eigen::Vector3d& lo, const Eigen::Vector3d& hi) {
  return (p - p.cwiseMax(lo).cwiseMin(hi)).norm();
}

void append_grid(std::vector<Eigen::Vector3d>& pts, std::vector<Eigen::Vector3d>& nrm,
                 const Eigen::Vector3d& origin, const Eigen::Vector3d& du, double lu,
                 const Eigen::Vector3d& dv, double lv, double step, const Eigen::Vector3d& normal) {
  const int nu = std::max(1, static_cast<int>(std::floor(lu / step)));
  const int nv = std::max(1, static_cast<int>(std::floor(lv / step)));
  for (int a = 0; a < nu; ++a)
    for (int b = 0; b < nv; ++b) {
      pts.push_back(origin + du * ((a + 0.5) * lu / nu) + dv * ((b + 0.5) * lv / nv));
      nrm.push_back(normal);
    }
}

}  // namespace

RigidTransformd BinSpec::default_camera(double z) {
  Eigen::Matrix3d r;
  r << 1, 0, 0,
       0, -1, 0,
       0, 0, -1;
  return RigidTransformd(r, Eigen::Vector3d(0, 0, z));
}

void BinSpec::validate() const {
  if (!(width > 0 && depth > 0 && height > 0)) throw InvalidArgument("bin dimensions must be positive");
  if (!(wall >= 0)) throw InvalidArgument("bin wall thickness must be non-negative");
  if (!(surface_spacing > 0)) throw InvalidArgument("bin surface spacing must be positive");
  if (!(pixel_angle > 0)) throw InvalidArgument("pixel angle must be positive");
  if (!camera.is_valid()) throw InvalidArgument("invalid camera pose");
  const Eigen::Vector3d to_bin = Eigen::Vector3d(0, 0, height / 2) - camera.translation;
  if (!(camera.rotation.col(2).dot(to_bin) > 0)) throw InvalidArgument("camera does not look into the bin");
}

PointCloudd BinSpec::surface_cloud() const {
  std::vector<Eigen::Vector3d> pts, nrm;
  const double w = width / 2, d = depth / 2;
  const Eigen::Vector3d ex = Eigen::Vector3d::UnitX(), ey = Eigen::Vector3d::UnitY(),
                        ez = Eigen::Vector3d::UnitZ();
  append_grid(pts, nrm, {-w, -d, 0}, ex, width, ey, depth, surface_spacing, ez);
  append_grid(pts, nrm, {-w, -d, 0}, ey, depth, ez, height, surface_spacing, ex);
  append_grid(pts, nrm, {w, -d, 0}, ey, depth, ez, height, surface_spacing, -ex);
  append_grid(pts, nrm, {-w, -d, 0}, ex, width, ez, height, surface_spacing, ey);
  append_grid(pts, nrm, {-w, d, 0}, ex, width, ez, height, surface_spacing, -ey);
  PointCloudd out;
  out.points.resize(3, static_cast<Index>(pts.size()));
  out.normals.resize(3, static_cast<Index>(pts.size()));
  for (std::size_t i = 0; i < pts.size(); ++i) {
    out.points.col(static_cast<Index>(i)) = pts[i];
    out.normals.col(static_cast<Index>(i)) = nrm[i];
  }
  return out;
}

double BinSpec::distance_to_surface(const Eigen::Vector3d& p) const {
  const double w = width / 2, d = depth / 2, h = height;
  double best = rect_distance(p, {-w, -d, 0}, {w, d, 0});
  best = std::min(best, rect_distance(p, {-w, -d, 0}, {-w, d, h}));
  best = std::min(best, rect_distance(p, {w, -d, 0}, {w, d, h}));
  best = std::min(best, rect_distance(p, {-w, -d, 0}, {w, -d, h}));
  best = std::min(best, rect_distance(p, {-w, d, 0}, {w, d, h}));
  return best;
}

double bounding_radius(const ObjectModel& model) {
  if (model.cloud.empty()) throw InvalidArgument("empty model");
  const Eigen::Vector3d c = centroid(model.cloud);
  return (model.cloud.points.colwise() - c).colwise().norm().maxCoeff();
}

std::vector<Index> visible_indices(const PointCloudd& cloud, const RigidTransformd& camera,
                                   double pixel_angle) {
  if (!(pixel_angle > 0)) throw InvalidArgument("pixel angle must be positive");
  const Index n = cloud.size();
  const RigidTransformd to_cam = camera.inverse();
  struct Ray {
    long long i, j;
    double depth;
  };
  std::vector<Ray> rays(static_cast<std::size_t>(n));
  std::vector<char> candidate(static_cast<std::size_t>(n), 0);
  std::unordered_map<std::uint64_t, double> zbuf;
  zbuf.reserve(static_cast<std::size_t>(n) * 2);
  for (Index k = 0; k < n; ++k) {
    const Eigen::Vector3d q = to_cam.apply_point(cloud.point(k));
    if (!(q.z() > 0)) continue;
    if (cloud.has_normals() && to_cam.apply_direction(cloud.normal(k)).dot(q) >= 0) continue;
    Ray r{static_cast<long long>(std::floor(std::atan2(q.x(), q.z()) / pixel_angle)),
          static_cast<long long>(std::floor(std::atan2(q.y(), q.z()) / pixel_angle)), q.norm()};
    rays[static_cast<std::size_t>(k)] = r;
    candidate[static_cast<std::size_t>(k)] = 1;
    for (long long di = -1; di <= 1; ++di)
      for (long long dj = -1; dj <= 1; ++dj) {
        auto [it, fresh] = zbuf.try_emplace(cell_key(r.i + di, r.j + dj), r.depth);
        if (!fresh) it->second = std::min(it->second, r.depth);
      }
  }
  std::vector<Index> keep;
  for (Index k = 0; k < n; ++k) {
    if (!candidate[static_cast<std::size_t>(k)]) continue;
    const Ray& r = rays[static_cast<std::size_t>(k)];
    const double band = kDepthBandCells * r.depth * pixel_angle;
    if (r.depth <= zbuf.at(cell_key(r.i, r.j)) + band) keep.push_back(k);
  }
  return keep;
}

PointCloudd visibility_filter(const PointCloudd& cloud, const RigidTransformd& camera,
                              double pixel_angle) {
  const auto idx = visible_indices(cloud, camera, pixel_angle);
  return cloud.select(idx);
}

BinScene sample_bin_scene(const ObjectModel& model, const BinSpec& bin, int n_instances,
                          std::uint64_t seed) {
  bin.validate();
  if (n_instances < 1 || n_instances > kMaxInstances)
    throw InvalidArgument("instance count must be in [1, 20]");
  const double r = bounding_radius(model);
  if (2 * r > std::min({bin.width, bin.depth, bin.height})) throw InvalidArgument("object larger than bin");
  const Eigen::Vector3d c0 = centroid(model.cloud);

  auto rng = make_rng(seed);
  std::vector<Eigen::Vector3d> centers;
  BinScene scene;
  const double min_sep = kSeparationFactor * 2 * r;
  const Eigen::Vector3d lo(-bin.width / 2 + r, -bin.depth / 2 + r, r);
  const Eigen::Vector3d hi(bin.width / 2 - r, bin.depth / 2 - r, bin.height - r);
  for (int i = 0; i < n_instances; ++i) {
    const double u1 = uniform_unit(rng), u2 = uniform_unit(rng), u3 = uniform_unit(rng);
    const Eigen::Matrix3d rot = rotation_from_uniforms(u1, u2, u3);
    Eigen::Vector3d c;
    bool placed = false;
    for (int t = 0; t < kMaxPlacementTries && !placed; ++t) {
      c = Eigen::Vector3d(uniform_in(rng, lo.x(), hi.x()), uniform_in(rng, lo.y(), hi.y()),
                          uniform_in(rng, lo.z(), hi.z()));
      placed = std::all_of(centers.begin(), centers.end(),
                           [&](const Eigen::Vector3d& o) { return (o - c).norm() >= min_sep; });
    }
    if (!placed) {
      double top = 0;
      for (const auto& o : centers) top = std::max(top, o.z() + r);
      c.z() = top + r;
    }
    centers.push_back(c);
    scene.poses.push_back(RigidTransformd::Translation(c) * RigidTransformd(rot, Eigen::Vector3d::Zero()) *
                          RigidTransformd::Translation(-c0));
  }

  PointCloudd all = bin.surface_cloud();
  for (const auto& pose : scene.poses) all = concatenate(all, apply_transform(pose, model.cloud));
  const RigidTransformd to_cam = bin.camera.inverse();
  scene.cloud = apply_transform(to_cam, visibility_filter(all, bin.camera, bin.pixel_angle));
  for (auto& pose : scene.poses) pose = to_cam * pose;
  return scene;
}

SceneSample crop_and_center(const BinScene& scene, const ObjectModel& model, const BinSpec& bin,
                            std::uint64_t seed) {
  if (scene.cloud.empty()) throw InvalidArgument("empty scene");
  if (scene.poses.empty()) throw InvalidArgument("scene has no instances");
  if (model.cloud.empty()) throw InvalidArgument("empty model");
  const double spacing = mean_spacing(model.cloud);
  const double radius = bounding_radius(model);
  const Eigen::Vector3d c0 = centroid(model.cloud);
  const double own_limit = kOwnershipSpacings * spacing;

  std::vector<KdTreed> trees;
  std::vector<Eigen::Vector3d> centers;
  for (const auto& pose : scene.poses) {
    trees.emplace_back(pose.apply_points(model.cloud.points));
    centers.push_back(pose.apply_point(c0));
  }

  const Index n = scene.cloud.size();
  std::vector<Index> remaining;
  std::vector<int> owner(static_cast<std::size_t>(n), -1);
  for (Index k = 0; k < n; ++k) {
    const Eigen::Vector3d p = scene.cloud.point(k);
    if (bin.distance_to_surface(bin.camera.apply_point(p)) < kBinMarginSpacings * spacing) continue;
    remaining.push_back(k);
    double best = std::numeric_limits<double>::infinity();
    int who = -1;
    for (std::size_t i = 0; i < trees.size(); ++i) {
      if ((p - centers[i]).norm() > radius + own_limit) continue;
      const double d = std::sqrt(trees[i].nearest(p).squared_distance);
      if (d < best) {
        best = d;
        who = static_cast<int>(i);
      }
    }
    if (best <= own_limit) owner[static_cast<std::size_t>(k)] = who;
  }
  std::vector<Index> owned;
  for (Index k : remaining)
    if (owner[static_cast<std::size_t>(k)] >= 0) owned.push_back(k);
  if (owned.empty()) throw DegenerateError("no object points visible");

  auto rng = make_rng(seed);
  const Index centre_idx = owned[uniform_index(rng, owned.size())];
  const Eigen::Vector3d s = scene.cloud.point(centre_idx);
  std::vector<Index> inside;
  for (Index k : remaining)
    if ((scene.cloud.point(k) - s).norm() <= model.diameter) inside.push_back(k);

  std::vector<Index> chosen;
  if (static_cast<Index>(inside.size()) >= kSceneCloudSize) {
    // Partial Fisher-Yates, then restore scan order.
    for (Index i = 0; i < kSceneCloudSize; ++i) {
      const auto j = static_cast<std::size_t>(i) +
                     uniform_index(rng, inside.size() - static_cast<std::size_t>(i));
      std::swap(inside[static_cast<std::size_t>(i)], inside[j]);
    }
    chosen.assign(inside.begin(), inside.begin() + kSceneCloudSize);
    std::sort(chosen.begin(), chosen.end());
  } else {
    chosen = inside;
    while (static_cast<Index>(chosen.size()) < kSceneCloudSize)
      chosen.push_back(inside[uniform_index(rng, inside.size())]);
  }

  SceneSample out;
  const auto shift = RigidTransformd::Translation(-s);
  out.cloud = apply_transform(shift, scene.cloud.select(chosen));
  out.target_instance = owner[static_cast<std::size_t>(centre_idx)];
  out.instance_mask.resize(chosen.size());
  for (std::size_t i = 0; i < chosen.size(); ++i)
    out.instance_mask[i] = owner[static_cast<std::size_t>(chosen[i])] == out.target_instance;
  for (const auto& pose : scene.poses) out.all_poses.push_back(shift * pose);
  out.gt_pose = out.all_poses[static_cast<std::size_t>(out.target_instance)];
  out.n_instances = static_cast<int>(scene.poses.size());
  out.viewpoint = -s;
  out.seed = seed;
  return out;
}

SceneSample generate_scene(const ObjectModel& model, const BinSpec& bin, int n_instances,
                           std::uint64_t seed) {
  const BinScene scene = sample_bin_scene(model, bin, n_instances, derive_seed(seed, 1));
  SceneSample s = crop_and_center(scene, model, bin, derive_seed(seed, 2));
  s.seed = seed;
  return s;
}

int instance_count_for(Index scene_index) {
  return static_cast<int>(scene_index % kMaxInstances) + 1;
}

}  // namespace kpose
