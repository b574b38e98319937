#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"
#include "kpose/core/error.hpp"
#include "kpose/core/rigid_transform.hpp"
#include "kpose/sampling.hpp"
#include "kpose/scenegen.hpp"

namespace kpose {

using Json = nlohmann::json;

/// {"R": [[r00, r01, r02], ...], "t": [x, y, z]}
Json pose_to_json(const RigidTransformd& pose);
/// Throws ParseError naming `source` when the value is malformed or R is
/// not a rotation.
RigidTransformd pose_from_json(const Json& value, const std::string& source);

/// Assigns j[key] to dst when present; a type mismatch is a ParseError.
template <typename T>
void read_field(const Json& j, const char* key, T& dst, const std::string& source) {
  if (!j.contains(key)) return;
  try {
    dst = j.at(key).get<T>();
  } catch (const Json::exception&) {
    throw ParseError(source, 0, std::string("bad value for \"") + key + "\"");
  }
}

Json read_json_file(const std::filesystem::path& path);
/// Two-space indented, trailing newline.
void write_json_file(const std::filesystem::path& path, const Json& value);

/// Writes <dir>/model.ply and the sidecar <dir>/model.json
/// ({"diameter", "keypoints", "seed"}).
void write_model(const std::filesystem::path& dir, const ObjectModel& model);
ObjectModel read_model(const std::filesystem::path& dir);

/// Writes <dir>/cloud.ply, <dir>/gt.json and <dir>/mask.csv.
void write_scene(const std::filesystem::path& dir, const SceneSample& scene);
SceneSample read_scene(const std::filesystem::path& dir);

}  // namespace kpose
