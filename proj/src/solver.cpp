#include "kpose/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "kpose/core/error.hpp"
#include "kpose/core/geometry.hpp"
#include "kpose/core/kd_tree.hpp"
#include "kpose/core/parallel.hpp"
#include "kpose/core/random.hpp"
#include "kpose/features.hpp"

namespace kpose {
namespace {

constexpr int kTripletRetries = 10;
constexpr double kMinTripletArea = 1e-6;  // times diameter^2

double triangle_area(const Eigen::Vector3d& a, const Eigen::Vector3d& b, const Eigen::Vector3d& c) {
  return 0.5 * (b - a).cross(c - a).norm();
}

PoseEstimate finish(const PairedPoints& pairs, const RigidTransformd& pose, Index inliers,
                    PoseEstimate est) {
  est.pose = pose;
  est.inlier_count = inliers;
  est.inlier_fraction = pairs.size() > 0 ? static_cast<double>(inliers) / pairs.size() : 0.0;
  return est;
}

std::vector<Index> selected(const std::vector<char>& mask) {
  std::vector<Index> idx;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) idx.push_back(static_cast<Index>(i));
  return idx;
}

std::optional<RigidTransformd> refit(const PairedPoints& pairs, const std::vector<Index>& idx) {
  if (idx.size() < 3) return std::nullopt;
  Eigen::Matrix3Xd src(3, static_cast<Index>(idx.size())), dst(3, static_cast<Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) {
    src.col(static_cast<Index>(k)) = pairs.src.col(idx[k]);
    dst.col(static_cast<Index>(k)) = pairs.dst.col(idx[k]);
  }
  return try_kabsch(src, dst);
}

}  // namespace

void RansacConfig::validate() const {
  if (n_hypotheses < 1) throw InvalidArgument("n_hypotheses must be >= 1");
  if (inlier_distance <= 0 && !(inlier_diameter_fraction > 0))
    throw InvalidArgument("inlier distance must be positive");
  if (!(normal_angle_max_deg >= 0 && normal_angle_max_deg <= 180))
    throw InvalidArgument("normal_angle_max must lie in [0, 180]");
  for (std::size_t i = 0; i < shrink_divisors.size(); ++i) {
    if (!(shrink_divisors[i] > 0)) throw InvalidArgument("shrink divisors must be positive");
    if (i > 0 && !(shrink_divisors[i] > shrink_divisors[i - 1]))
      throw InvalidArgument("shrink divisors must be strictly increasing");
  }
  if (icp_max_iter < 0) throw InvalidArgument("icp_max_iter must be >= 0");
}

PairedPoints pair_keypoints(const PointCloudd& scene, const ObjectModel& model,
                            const CorrespondenceSet& corr) {
  CorrespondenceSet resolved;
  resolved.pairs.reserve(corr.pairs.size());
  for (const auto& c : corr.pairs) {
    if (c.target < 0 || c.target >= model.keypoint_count())
      throw InvalidArgument("keypoint index out of range");
    resolved.pairs.push_back({c.scene, model.keypoint_indices[static_cast<std::size_t>(c.target)], c.weight});
  }
  return pair_points(scene, model.cloud, resolved);
}

PairedPoints pair_points(const PointCloudd& scene, const PointCloudd& object,
                         const CorrespondenceSet& corr) {
  PairedPoints p;
  const Index n = corr.size();
  const bool normals = scene.has_normals() && object.has_normals();
  p.src.resize(3, n);
  p.dst.resize(3, n);
  if (normals) {
    p.src_normals.resize(3, n);
    p.dst_normals.resize(3, n);
  }
  for (Index k = 0; k < n; ++k) {
    const auto& c = corr.pairs[static_cast<std::size_t>(k)];
    if (c.scene < 0 || c.scene >= scene.size()) throw InvalidArgument("scene index out of range");
    if (c.target < 0 || c.target >= object.size()) throw InvalidArgument("target index out of range");
    p.src.col(k) = object.points.col(c.target);
    p.dst.col(k) = scene.points.col(c.scene);
    if (normals) {
      p.src_normals.col(k) = object.normals.col(c.target);
      p.dst_normals.col(k) = scene.normals.col(c.scene);
    }
  }
  return p;
}

Hypothesis score_pose(const PairedPoints& pairs, const RigidTransformd& pose, double inlier_distance,
                      const RansacConfig& cfg, std::vector<char>* mask) {
  const Index n = pairs.size();
  const double limit = inlier_distance * inlier_distance;
  const bool gate = cfg.normal_gate && pairs.has_normals();
  const double min_cos = std::cos(cfg.normal_angle_max_deg * M_PI / 180.0);
  const Eigen::Matrix3d& r = pose.rotation;
  const Eigen::Vector3d& t = pose.translation;
  const double* src = pairs.src.data();
  const double* dst = pairs.dst.data();
  const double* sn = gate ? pairs.src_normals.data() : nullptr;
  const double* dn = gate ? pairs.dst_normals.data() : nullptr;
  if (mask) mask->assign(static_cast<std::size_t>(n), 0);

  Index inliers = 0;
  double sum = 0;
  for (Index i = 0; i < n; ++i) {
    const double* s = src + 3 * i;
    const double* d = dst + 3 * i;
    const double x = r(0, 0) * s[0] + r(0, 1) * s[1] + r(0, 2) * s[2] + t(0) - d[0];
    const double y = r(1, 0) * s[0] + r(1, 1) * s[1] + r(1, 2) * s[2] + t(1) - d[1];
    const double z = r(2, 0) * s[0] + r(2, 1) * s[1] + r(2, 2) * s[2] + t(2) - d[2];
    const double sq = x * x + y * y + z * z;
    if (!(sq <= limit)) continue;
    if (gate) {
      const double* a = sn + 3 * i;
      const double* b = dn + 3 * i;
      const double c = (r(0, 0) * a[0] + r(0, 1) * a[1] + r(0, 2) * a[2]) * b[0] +
                       (r(1, 0) * a[0] + r(1, 1) * a[1] + r(1, 2) * a[2]) * b[1] +
                       (r(2, 0) * a[0] + r(2, 1) * a[1] + r(2, 2) * a[2]) * b[2];
      if (!(c >= min_cos)) continue;
    }
    ++inliers;
    sum += sq;
    if (mask) (*mask)[static_cast<std::size_t>(i)] = 1;
  }
  Hypothesis h;
  h.pose = pose;
  h.inliers = inliers;
  h.rms = inliers > 0 ? std::sqrt(sum / static_cast<double>(inliers)) : 0.0;
  return h;
}

std::vector<Hypothesis> generate_hypotheses(const PairedPoints& pairs, double inlier_distance,
                                            double diameter, const RansacConfig& cfg) {
  std::vector<Hypothesis> hyps(static_cast<std::size_t>(cfg.n_hypotheses));
  const Index n = pairs.size();
  if (n < 3) return hyps;
  const double min_area = kMinTripletArea * diameter * diameter;
  const auto count = static_cast<std::uint64_t>(n);

  parallel_for(cfg.n_hypotheses, cfg.workers, [&](Index begin, Index end) {
    for (Index h = begin; h < end; ++h) {
      Rng rng = make_rng(cfg.seed, static_cast<std::uint64_t>(h));
      for (int attempt = 0; attempt < kTripletRetries; ++attempt) {
        const Index a = static_cast<Index>(uniform_index(rng, count));
        Index b = static_cast<Index>(uniform_index(rng, count - 1));
        if (b >= a) ++b;
        Index c = static_cast<Index>(uniform_index(rng, count - 2));
        for (Index lo : {std::min(a, b), std::max(a, b)})
          if (c >= lo) ++c;
        if (triangle_area(pairs.dst.col(a), pairs.dst.col(b), pairs.dst.col(c)) < min_area ||
            triangle_area(pairs.src.col(a), pairs.src.col(b), pairs.src.col(c)) < min_area)
          continue;
        Eigen::Matrix3d src, dst;
        src << pairs.src.col(a), pairs.src.col(b), pairs.src.col(c);
        dst << pairs.dst.col(a), pairs.dst.col(b), pairs.dst.col(c);
        const auto pose = try_kabsch(src, dst);
        if (!pose) continue;
        hyps[static_cast<std::size_t>(h)] = score_pose(pairs, *pose, inlier_distance, cfg);
        break;
      }
    }
  });
  return hyps;
}

Index select_best(const std::vector<Hypothesis>& hyps) {
  Index best = -1;
  for (Index i = 0; i < static_cast<Index>(hyps.size()); ++i) {
    const auto& h = hyps[static_cast<std::size_t>(i)];
    if (h.inliers < 0) continue;
    if (best < 0) {
      best = i;
      continue;
    }
    const auto& b = hyps[static_cast<std::size_t>(best)];
    if (h.inliers > b.inliers || (h.inliers == b.inliers && h.rms < b.rms)) best = i;
  }
  return best;
}

PoseEstimate ransac_coarse_to_fine(const PairedPoints& pairs, double diameter,
                                   const RansacConfig& cfg) {
  cfg.validate();
  if (pairs.size() < 3) throw InvalidArgument("need at least 3 correspondences");
  const double coarse = cfg.resolve_inlier_distance(diameter);

  const auto hyps = generate_hypotheses(pairs, coarse, diameter, cfg);
  const Index best = select_best(hyps);
  PoseEstimate est;
  if (best < 0 || hyps[static_cast<std::size_t>(best)].inliers == 0) {
    est.stages.push_back({coarse, 0});
    return finish(pairs, best < 0 ? RigidTransformd{} : hyps[static_cast<std::size_t>(best)].pose, 0,
                  est);
  }
  RigidTransformd pose = hyps[static_cast<std::size_t>(best)].pose;
  est.stages.push_back({coarse, hyps[static_cast<std::size_t>(best)].inliers});

  std::vector<double> distances{coarse};
  for (double d : cfg.shrink_divisors) distances.push_back(coarse / d);

  std::vector<char> mask;
  for (std::size_t s = 0; s < distances.size(); ++s) {
    score_pose(pairs, pose, distances[s], cfg, &mask);
    if (auto fit = refit(pairs, selected(mask))) {
      pose = *fit;
      est.refined = true;
    }
    if (s > 0) est.stages.push_back({distances[s], score_pose(pairs, pose, distances[s], cfg).inliers});
  }
  const Index final_inliers = score_pose(pairs, pose, distances.back(), cfg).inliers;
  return finish(pairs, pose, final_inliers, est);
}

PoseEstimate ransac_coarse_to_fine(const PointCloudd& scene, const ObjectModel& model,
                                   const CorrespondenceSet& corr, const RansacConfig& cfg) {
  if (corr.size() < 3) throw InvalidArgument("need at least 3 correspondences");
  return ransac_coarse_to_fine(pair_keypoints(scene, model, corr), model.diameter, cfg);
}

PoseEstimate ransac_single_stage(const PairedPoints& pairs, double diameter, const RansacConfig& cfg) {
  cfg.validate();
  if (pairs.size() < 3) throw InvalidArgument("need at least 3 correspondences");
  const double dist = cfg.resolve_inlier_distance(diameter);
  const auto hyps = generate_hypotheses(pairs, dist, diameter, cfg);
  const Index best = select_best(hyps);
  PoseEstimate est;
  if (best < 0 || hyps[static_cast<std::size_t>(best)].inliers == 0) {
    est.stages.push_back({dist, 0});
    return finish(pairs, best < 0 ? RigidTransformd{} : hyps[static_cast<std::size_t>(best)].pose, 0,
                  est);
  }
  RigidTransformd pose = hyps[static_cast<std::size_t>(best)].pose;
  est.stages.push_back({dist, hyps[static_cast<std::size_t>(best)].inliers});
  std::vector<char> mask;
  score_pose(pairs, pose, dist, cfg, &mask);
  if (auto fit = refit(pairs, selected(mask))) {
    pose = *fit;
    est.refined = true;
  }
  return finish(pairs, pose, score_pose(pairs, pose, dist, cfg).inliers, est);
}

IcpResult icp_refine(const PointCloudd& scene, const PointCloudd& model_cloud,
                     const RigidTransformd& init, int max_iter, double inlier_distance) {
  IcpResult result;
  result.pose = init;
  if (max_iter <= 0 || scene.empty() || model_cloud.empty()) return result;
  const KdTreed tree(scene.points);
  const double limit = inlier_distance * inlier_distance;

  auto pair_up = [&](const RigidTransformd& pose, std::vector<Index>& model_idx,
                     std::vector<Index>& scene_idx) {
    model_idx.clear();
    scene_idx.clear();
    // Unpaired points count as exactly the pairing distance, so the value is
    // a truncated RMS that Kabsch plus re-pairing can never increase.
    double sum = 0;
    const Eigen::Matrix3Xd moved = pose.apply_points(model_cloud.points);
    for (Index i = 0; i < moved.cols(); ++i) {
      const auto nb = tree.nearest_within(moved.col(i), limit);
      if (nb.index < 0) {
        sum += limit;
        continue;
      }
      model_idx.push_back(i);
      scene_idx.push_back(nb.index);
      sum += nb.squared_distance;
    }
    return std::sqrt(sum / static_cast<double>(moved.cols()));
  };

  std::vector<Index> model_idx, scene_idx, next_model, next_scene;
  double rms = pair_up(init, model_idx, scene_idx);
  if (model_idx.size() < 3) {
    result.no_pairs = true;
    return result;
  }
  result.rms_history.push_back(rms);

  for (int it = 0; it < max_iter; ++it) {
    Eigen::Matrix3Xd src(3, static_cast<Index>(model_idx.size())), dst(3, src.cols());
    for (Index k = 0; k < src.cols(); ++k) {
      src.col(k) = model_cloud.points.col(model_idx[static_cast<std::size_t>(k)]);
      dst.col(k) = scene.points.col(scene_idx[static_cast<std::size_t>(k)]);
    }
    const auto fit = try_kabsch(src, dst);
    if (!fit) break;
    const double next_rms = pair_up(*fit, next_model, next_scene);
    if (next_model.size() < 3 || next_rms > rms) break;
    result.pose = *fit;
    result.iterations = it + 1;
    result.rms_history.push_back(next_rms);
    const bool unchanged = next_model == model_idx && next_scene == scene_idx;
    std::swap(model_idx, next_model);
    std::swap(scene_idx, next_scene);
    rms = next_rms;
    if (unchanged) {
      result.converged = true;
      break;
    }
  }
  return result;
}

PoseEstimate ransac_classic(const PairedPoints& pairs, const PointCloudd& scene,
                            const PointCloudd& model_cloud, double diameter, const RansacConfig& cfg) {
  PoseEstimate est;
  if (pairs.size() < 3) return finish(pairs, RigidTransformd{}, 0, est);
  RansacConfig single = cfg;
  single.normal_gate = false;
  est = ransac_single_stage(pairs, diameter, single);
  if (est.inlier_count == 0) return est;
  const double dist = cfg.resolve_inlier_distance(diameter);
  const auto icp = icp_refine(scene, model_cloud, est.pose, cfg.icp_max_iter, dist);
  est.pose = icp.pose;
  est.refined = est.refined || icp.iterations > 0;
  return finish(pairs, est.pose, score_pose(pairs, est.pose, dist, single).inliers, est);
}

PoseEstimate ransac_classic(const FeatureCloud& scene, const FeatureCloud& object,
                            const RansacConfig& cfg, bool mutual_filter) {
  const auto corr = match_features(scene, object, mutual_filter);
  return ransac_classic(pair_points(scene.cloud, object.cloud, corr), scene.cloud, object.cloud,
                        diameter(object.cloud), cfg);
}

PoseEstimate ransac_classic(const PointCloudd& scene, const ObjectModel& model,
                            const CorrespondenceSet& corr, const RansacConfig& cfg) {
  if (corr.size() < 3) throw InvalidArgument("need at least 3 correspondences");
  return ransac_classic(pair_keypoints(scene, model, corr), scene, model.cloud, model.diameter, cfg);
}

}  // namespace kpose
