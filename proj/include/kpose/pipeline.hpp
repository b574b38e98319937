#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "kpose/features.hpp"
#include "kpose/matchgen.hpp"
#include "kpose/scenegen.hpp"
#include "kpose/serialization.hpp"
#include "kpose/solver.hpp"

namespace kpose {

enum class Method { kOracleC2f, kOracleClassic, kFpfh };

inline constexpr Method kAllMethods[] = {Method::kOracleC2f, Method::kOracleClassic, Method::kFpfh};

/// "oracle-c2f", "oracle-classic" or "fpfh".
std::string_view method_name(Method m);
Method parse_method(std::string_view name);

struct PipelineConfig {
  OracleSpec oracle;
  RansacConfig ransac;
  double vote_threshold = 0.7;
  bool mutual_filter = true;
  double fpfh_radius = 0;  // <= 0: default_fpfh_radius of the object cloud
  Index normal_k = 30;

  void validate() const;
  /// Overrides only the fields present in `j`.
  void merge_json(const Json& j, const std::string& source);
  Json to_json() const;
};

/// Per-object data computed once and reused across scenes.
struct PreparedObject {
  std::string id;
  ObjectModel model;
  OracleTable oracle_table;
  FeatureCloud features;
  double fpfh_radius = 0;

  static PreparedObject build(std::string id, ObjectModel model, const PipelineConfig& cfg);
};

/// Scene as the sensor would deliver it: points jittered by
/// noise_fraction * diameter, no normals.
PointCloudd observe_scene(const SceneSample& scene, double noise_fraction, double diameter,
                          std::uint64_t seed);

struct EstimateResult {
  Method method = Method::kOracleC2f;
  PoseEstimate estimate;
  Index correspondences = 0;
  double match_ms = 0;   // normals, correspondence generation
  double ransac_ms = 0;  // pose search and refinement
  bool failed = false;   // too few correspondences or a degenerate fit
  std::string error;

  double runtime_ms() const { return match_ms + ransac_ms; }
  Json to_json() const;
};

/// Runs one method on an observed scene. Scene normals are re-estimated
/// towards scene.viewpoint. The oracle and RANSAC seeds are derived from
/// `seed`; the seeds inside `cfg` are ignored. Failures are reported in the
/// result, not thrown.
EstimateResult estimate_pose(const PreparedObject& object, const SceneSample& scene,
                             const PointCloudd& observed, Method method, const PipelineConfig& cfg,
                             std::uint64_t seed);

}  // namespace kpose
