#include "kpose/serialization.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "kpose/core/error.hpp"
#include "kpose/core/io.hpp"

namespace kpose {
namespace {

namespace fs = std::filesystem;

Json vec_to_json(const Eigen::Vector3d& v) { return Json::array({v.x(), v.y(), v.z()}); }

Eigen::Vector3d vec_from_json(const Json& v, const std::string& source, const char* what) {
  if (!v.is_array() || v.size() != 3) throw ParseError(source, 0, std::string(what) + " must be 3 numbers");
  Eigen::Vector3d out;
  for (int i = 0; i < 3; ++i) {
    if (!v[static_cast<std::size_t>(i)].is_number())
      throw ParseError(source, 0, std::string(what) + " must be 3 numbers");
    out(i) = v[static_cast<std::size_t>(i)].get<double>();
  }
  return out;
}

const Json& field(const Json& obj, const char* key, const std::string& source) {
  if (!obj.is_object() || !obj.contains(key)) throw ParseError(source, 0, std::string("missing \"") + key + "\"");
  return obj.at(key);
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create directory " + dir.string());
}

}  // namespace

Json pose_to_json(const RigidTransformd& pose) {
  Json r = Json::array();
  for (int i = 0; i < 3; ++i) r.push_back(vec_to_json(pose.rotation.row(i).transpose()));
  return Json{{"R", r}, {"t", vec_to_json(pose.translation)}};
}

RigidTransformd pose_from_json(const Json& value, const std::string& source) {
  const Json& r = field(value, "R", source);
  if (!r.is_array() || r.size() != 3) throw ParseError(source, 0, "R must be a 3x3 array");
  RigidTransformd pose;
  for (int i = 0; i < 3; ++i)
    pose.rotation.row(i) = vec_from_json(r[static_cast<std::size_t>(i)], source, "R row").transpose();
  pose.translation = vec_from_json(field(value, "t", source), source, "t");
  if (!pose.is_valid(1e-6)) throw ParseError(source, 0, "R is not a rotation matrix");
  return pose;
}

Json read_json_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    const auto end = std::min<std::size_t>(e.byte, text.size());
    const long line = 1 + static_cast<long>(std::count(text.begin(), text.begin() + static_cast<long>(end), '\n'));
    throw ParseError(path.string(), line, "invalid JSON");
  }
}

void write_json_file(const fs::path& path, const Json& value) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << value.dump(2) << '\n';
  if (!out) throw IoError("cannot write " + path.string());
}

void write_model(const fs::path& dir, const ObjectModel& model) {
  model.validate();
  ensure_dir(dir);
  write_ply_cloud(dir / "model.ply", model.cloud);
  Json side;
  side["keypoints"] = model.keypoint_indices;
  side["diameter"] = model.diameter;
  side["seed"] = model.seed;
  write_json_file(dir / "model.json", side);
}

ObjectModel read_model(const fs::path& dir) {
  ObjectModel m;
  m.cloud = read_ply_cloud(dir / "model.ply");
  const std::string source = (dir / "model.json").string();
  const Json side = read_json_file(dir / "model.json");
  try {
    m.keypoint_indices = field(side, "keypoints", source).get<std::vector<Index>>();
    m.diameter = field(side, "diameter", source).get<double>();
    m.seed = field(side, "seed", source).get<std::uint64_t>();
  } catch (const Json::exception&) {
    throw ParseError(source, 0, "bad sidecar field");
  }
  try {
    m.validate();
  } catch (const InvalidArgument& e) {
    throw ParseError(source, 0, e.what());
  }
  return m;
}

void write_scene(const fs::path& dir, const SceneSample& scene) {
  if (scene.instance_mask.size() != static_cast<std::size_t>(scene.cloud.size()))
    throw InvalidArgument("mask length does not match cloud size");
  ensure_dir(dir);
  write_ply_cloud(dir / "cloud.ply", scene.cloud);
  Json gt;
  gt["target_pose"] = pose_to_json(scene.gt_pose);
  gt["all_poses"] = Json::array();
  for (const auto& p : scene.all_poses) gt["all_poses"].push_back(pose_to_json(p));
  gt["n_instances"] = scene.n_instances;
  gt["target_instance"] = scene.target_instance;
  gt["seed"] = scene.seed;
  gt["viewpoint"] = vec_to_json(scene.viewpoint);
  write_json_file(dir / "gt.json", gt);
  std::ofstream mask(dir / "mask.csv", std::ios::binary | std::ios::trunc);
  if (!mask) throw IoError("cannot write " + (dir / "mask.csv").string());
  mask << "mask\n";
  for (bool b : scene.instance_mask) mask << (b ? "1\n" : "0\n");
}

SceneSample read_scene(const fs::path& dir) {
  SceneSample s;
  s.cloud = read_ply_cloud(dir / "cloud.ply");
  const std::string source = (dir / "gt.json").string();
  const Json gt = read_json_file(dir / "gt.json");
  s.gt_pose = pose_from_json(field(gt, "target_pose", source), source);
  const Json& all = field(gt, "all_poses", source);
  if (!all.is_array()) throw ParseError(source, 0, "all_poses must be an array");
  for (const auto& p : all) s.all_poses.push_back(pose_from_json(p, source));
  try {
    s.n_instances = field(gt, "n_instances", source).get<int>();
    s.seed = field(gt, "seed", source).get<std::uint64_t>();
    s.target_instance = gt.value("target_instance", 0);
  } catch (const Json::exception&) {
    throw ParseError(source, 0, "bad field type");
  }
  if (gt.contains("viewpoint")) s.viewpoint = vec_from_json(gt.at("viewpoint"), source, "viewpoint");
  if (s.n_instances != static_cast<int>(s.all_poses.size()))
    throw ParseError(source, 0, "n_instances does not match all_poses");

  const fs::path mask_path = dir / "mask.csv";
  std::ifstream mask(mask_path, std::ios::binary);
  if (!mask) throw IoError("cannot open " + mask_path.string());
  std::string line;
  long line_no = 0;
  while (std::getline(mask, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1 && line == "mask") continue;
    if (line == "1") s.instance_mask.push_back(true);
    else if (line == "0") s.instance_mask.push_back(false);
    else if (!line.empty()) throw ParseError(mask_path.string(), line_no, "expected 0 or 1");
  }
  if (s.instance_mask.size() != static_cast<std::size_t>(s.cloud.size()))
    throw ParseError(mask_path.string(), line_no, "mask length does not match cloud size");
  return s;
}

}  // namespace kpose
