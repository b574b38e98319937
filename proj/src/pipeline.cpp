#include "kpose/pipeline.hpp"

#include <chrono>

#include "kpose/core/error.hpp"
#include "kpose/core/normals.hpp"
#include "kpose/core/random.hpp"

namespace kpose {
namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

}  // namespace

std::string_view method_name(Method m) {
  switch (m) {
    case Method::kOracleC2f: return "oracle-c2f";
    case Method::kOracleClassic: return "oracle-classic";
    case Method::kFpfh: return "fpfh";
  }
  return "?";
}

Method parse_method(std::string_view name) {
  for (Method m : kAllMethods)
    if (method_name(m) == name) return m;
  throw InvalidArgument("unknown method '" + std::string(name) + "'");
}

void PipelineConfig::validate() const {
  oracle.validate();
  ransac.validate();
  if (!(vote_threshold > 0 && vote_threshold <= 1)) throw InvalidArgument("vote_threshold must be in (0,1]");
  if (normal_k < 3) throw InvalidArgument("normal_k must be at least 3");
}

void PipelineConfig::merge_json(const Json& j, const std::string& source) {
  if (!j.is_object()) throw ParseError(source, 0, "pipeline settings must be an object");
  read_field(j, "vote_threshold", vote_threshold, source);
  read_field(j, "mutual_filter", mutual_filter, source);
  read_field(j, "fpfh_radius", fpfh_radius, source);
  read_field(j, "normal_k", normal_k, source);
  if (j.contains("oracle")) {
    const Json& o = j.at("oracle");
    read_field(o, "seg_accuracy", oracle.seg_accuracy, source);
    read_field(o, "keypoint_accuracy", oracle.keypoint_accuracy, source);
    read_field(o, "temperature", oracle.temperature, source);
  }
  if (j.contains("ransac")) {
    const Json& r = j.at("ransac");
    read_field(r, "n_hypotheses", ransac.n_hypotheses, source);
    read_field(r, "inlier_distance", ransac.inlier_distance, source);
    read_field(r, "inlier_diameter_fraction", ransac.inlier_diameter_fraction, source);
    read_field(r, "normal_angle_max_deg", ransac.normal_angle_max_deg, source);
    read_field(r, "normal_gate", ransac.normal_gate, source);
    read_field(r, "shrink_divisors", ransac.shrink_divisors, source);
    read_field(r, "workers", ransac.workers, source);
    read_field(r, "icp_max_iter", ransac.icp_max_iter, source);
  }
}

Json PipelineConfig::to_json() const {
  return Json{{"vote_threshold", vote_threshold},
              {"mutual_filter", mutual_filter},
              {"fpfh_radius", fpfh_radius},
              {"normal_k", normal_k},
              {"oracle",
               {{"seg_accuracy", oracle.seg_accuracy},
                {"keypoint_accuracy", oracle.keypoint_accuracy},
                {"temperature", oracle.temperature}}},
              {"ransac",
               {{"n_hypotheses", ransac.n_hypotheses},
                {"inlier_distance", ransac.inlier_distance},
                {"inlier_diameter_fraction", ransac.inlier_diameter_fraction},
                {"normal_angle_max_deg", ransac.normal_angle_max_deg},
                {"normal_gate", ransac.normal_gate},
                {"shrink_divisors", ransac.shrink_divisors},
                {"icp_max_iter", ransac.icp_max_iter}}}};
}

PreparedObject PreparedObject::build(std::string id, ObjectModel model, const PipelineConfig& cfg) {
  model.validate();
  PreparedObject p;
  p.id = std::move(id);
  p.oracle_table = OracleTable::build(model);
  p.fpfh_radius = cfg.fpfh_radius > 0 ? cfg.fpfh_radius : default_fpfh_radius(model.cloud);
  p.features = compute_fpfh(model.cloud, p.fpfh_radius, cfg.ransac.workers);
  p.model = std::move(model);
  return p;
}

PointCloudd observe_scene(const SceneSample& scene, double noise_fraction, double diameter,
                          std::uint64_t seed) {
  if (noise_fraction < 0) throw InvalidArgument("noise must be non-negative");
  PointCloudd pts(scene.cloud.points);
  if (noise_fraction == 0) return pts;
  NormalOptions<double> none;
  none.k = pts.size() + 1;  // too few points: add_noise skips normal estimation
  return add_noise(pts, {noise_fraction, seed}, diameter, none);
}

Json EstimateResult::to_json() const {
  Json j = pose_to_json(estimate.pose);
  j["method"] = std::string(method_name(method));
  j["inlier_count"] = estimate.inlier_count;
  j["inlier_fraction"] = estimate.inlier_fraction;
  j["refined"] = estimate.refined;
  j["correspondences"] = correspondences;
  j["failed"] = failed;
  if (!error.empty()) j["error"] = error;
  j["match_ms"] = match_ms;
  j["ransac_ms"] = ransac_ms;
  return j;
}

EstimateResult estimate_pose(const PreparedObject& object, const SceneSample& scene,
                             const PointCloudd& observed, Method method, const PipelineConfig& cfg,
                             std::uint64_t seed) {
  cfg.validate();
  EstimateResult out;
  out.method = method;
  RansacConfig rc = cfg.ransac;
  rc.seed = derive_seed(seed, 2);

  try {
    const auto t0 = Clock::now();
    NormalOptions<double> nopt;
    nopt.k = std::min<Index>(cfg.normal_k, observed.size());
    nopt.orientation = NormalOrientation::kTowardViewpoint;
    nopt.viewpoint = scene.viewpoint;
    nopt.workers = rc.workers;
    const PointCloudd cloud = estimate_normals(PointCloudd(observed.points), nopt);

    if (method == Method::kFpfh) {
      const FeatureCloud feats = compute_fpfh(cloud, object.fpfh_radius, rc.workers);
      const auto corr = match_features(feats, object.features, cfg.mutual_filter);
      const PairedPoints pairs = pair_points(cloud, object.model.cloud, corr);
      out.correspondences = corr.size();
      out.match_ms = elapsed_ms(t0);
      const auto t1 = Clock::now();
      if (pairs.size() >= 3)
        out.estimate = ransac_classic(pairs, cloud, object.model.cloud, object.model.diameter, rc);
      out.ransac_ms = elapsed_ms(t1);
    } else {
      OracleSpec spec = cfg.oracle;
      spec.seed = derive_seed(seed, 1);
      const auto pred = oracle_predict(cloud, object.oracle_table, scene.gt_pose, scene.instance_mask, spec);
      const auto corr = extract_correspondences(pred, cfg.vote_threshold);
      const PairedPoints pairs = pair_keypoints(cloud, object.model, corr);
      out.correspondences = corr.size();
      out.match_ms = elapsed_ms(t0);
      const auto t1 = Clock::now();
      if (pairs.size() >= 3)
        out.estimate = method == Method::kOracleC2f
            ? ransac_coarse_to_fine(pairs, object.model.diameter, rc)
            : ransac_classic(pairs, cloud, object.model.cloud, object.model.diameter, rc);
      out.ransac_ms = elapsed_ms(t1);
    }
    if (out.estimate.inlier_count == 0) {
      out.failed = true;
      out.error = out.correspondences < 3 ? "too few correspondences" : "no consistent hypothesis";
    }
  } catch (const DegenerateError& e) {
    out.failed = true;
    out.error = e.what();
  }
  if (out.failed) out.estimate.inlier_count = 0;
  return out;
}

}  // namespace kpose
