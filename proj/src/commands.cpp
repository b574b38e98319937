#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "kpose/bench.hpp"
#include "kpose/cli.hpp"
#include "kpose/core/error.hpp"
#include "kpose/core/io.hpp"
#include "kpose/core/random.hpp"
#include "kpose/shapes.hpp"

namespace kpose {
namespace {

namespace fs = std::filesystem;

std::string scene_dir_name(Index i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04ld", static_cast<long>(i));
  return buf;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create directory " + dir.string());
}

void emit_json(const Json& j, const std::string& path, std::ostream& out) {
  if (path.empty()) {
    out << j.dump(2) << '\n';
  } else {
    const fs::path p(path);
    if (p.has_parent_path()) ensure_dir(p.parent_path());
    write_json_file(p, j);
  }
}

struct ModelArgs {
  std::string mesh, out;
  Index keypoints = 100;
  std::uint64_t seed = 0;
};

int cmd_model(const ModelArgs& a, std::ostream& out) {
  const ObjectModel model = build_object_model(read_mesh(a.mesh), a.keypoints, a.seed);
  ensure_dir(a.out);
  write_model(a.out, model);
  out << "model " << a.out << ": " << model.cloud.size() << " points, "
      << model.keypoint_indices.size() << " keypoints, diameter " << format_real(model.diameter)
      << '\n';
  return kExitOk;
}

struct ScenegenArgs {
  std::string model, out;
  Index count = 1, first = 0;
  std::uint64_t seed = 0;
};

int cmd_scenegen(const ScenegenArgs& a, std::ostream& out) {
  if (a.count < 1) throw InvalidArgument("count must be positive");
  if (a.first < 0) throw InvalidArgument("first must be non-negative");
  const ObjectModel model = read_model(a.model);
  const BinSpec bin;
  ensure_dir(a.out);
  for (Index i = a.first; i < a.first + a.count; ++i) {
    const SceneSample s = generate_scene(model, bin, instance_count_for(i), derive_seed(a.seed, i));
    write_scene(fs::path(a.out) / scene_dir_name(i), s);
  }
  out << "scenegen " << a.out << ": " << a.count << " scenes\n";
  return kExitOk;
}

struct EstimateArgs {
  std::string scene, model, method = "oracle-c2f", config, out;
  double noise = 0;
  double vote_threshold = -1;
  std::uint64_t seed = 0;
  unsigned workers = 0;
};

PipelineConfig pipeline_from(const std::string& config, double vote_threshold, unsigned workers) {
  PipelineConfig cfg;
  if (!config.empty()) cfg.merge_json(read_json_file(config), config);
  if (vote_threshold >= 0) cfg.vote_threshold = vote_threshold;
  if (workers > 0) cfg.ransac.workers = workers;
  cfg.validate();
  return cfg;
}

int cmd_estimate(const EstimateArgs& a, std::ostream& out) {
  const PipelineConfig cfg = pipeline_from(a.config, a.vote_threshold, a.workers);
  const Method method = parse_method(a.method);
  const SceneSample scene = read_scene(a.scene);
  // Object features are prepared before timing starts.
  const PreparedObject obj = PreparedObject::build(fs::path(a.model).filename().string(),
                                                   read_model(a.model), cfg);
  const PointCloudd observed =
      observe_scene(scene, a.noise, obj.model.diameter, derive_seed(a.seed, 10));
  const EstimateResult res = estimate_pose(obj, scene, observed, method, cfg, derive_seed(a.seed, 20));
  Json j = res.to_json();
  j["noise"] = a.noise;
  j["seed"] = a.seed;
  emit_json(j, a.out, out);
  return kExitOk;
}

struct EvalArgs {
  std::string pose, scene, model;
  double tau = kDefaultAdiThreshold;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  if (!(a.tau > 0)) throw InvalidArgument("tau must be positive");
  const Json pj = read_json_file(a.pose);
  const RigidTransformd pose = pose_from_json(pj, a.pose);
  const bool failed = pj.contains("failed") && pj.at("failed").is_boolean() && pj.at("failed").get<bool>();
  const SceneSample scene = read_scene(a.scene);
  const ObjectModel model = read_model(a.model);
  const EvalResult ev = evaluate_pose(pose, scene.gt_pose, model.cloud, model.diameter, a.tau);
  out << Json{{"adi", ev.adi},
              {"add", ev.add},
              {"diameter", model.diameter},
              {"tau", a.tau},
              {"correct", ev.correct && !failed}}
             .dump(2)
      << '\n';
  return kExitOk;
}

struct BenchArgs {
  std::string config, out;
  bool resume = false;
  std::int64_t seed = -1;
  int workers = -1;
};

int cmd_bench(const BenchArgs& a, std::ostream& out, std::ostream& err) {
  BenchmarkConfig cfg = BenchmarkConfig::load(a.config);
  if (!a.out.empty()) cfg.output = a.out;
  if (a.seed >= 0) cfg.seed = static_cast<std::uint64_t>(a.seed);
  if (a.workers >= 0) cfg.workers = static_cast<unsigned>(a.workers);
  const BenchmarkReport report = run_benchmark(cfg, a.resume, &err);
  out << report.summary.table();
  out << "results: " << (cfg.output / "results.csv").string() << '\n';
  return kExitOk;
}

int cmd_shapes(const std::string& dir, std::ostream& out) {
  ensure_dir(dir);
  for (const auto& [name, mesh] : shapes::shipped()) {
    write_obj_mesh(fs::path(dir) / (name + ".obj"), mesh);
    out << (fs::path(dir) / (name + ".obj")).string() << '\n';
  }
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Keypoint-matching 6D pose estimation toolkit", "kpose"};
  app.require_subcommand(1);

  ModelArgs ma;
  auto* model = app.add_subcommand("model", "Sample an object model and keypoints from a mesh");
  model->add_option("mesh", ma.mesh, "OBJ or PLY mesh")->required();
  model->add_option("--keypoints,-k", ma.keypoints, "Number of keypoints")->capture_default_str();
  model->add_option("--seed", ma.seed, "Random seed")->capture_default_str();
  model->add_option("--out,-o", ma.out, "Output directory")->required();

  ScenegenArgs sa;
  auto* scenegen = app.add_subcommand("scenegen", "Generate cropped bin scenes for a model");
  scenegen->add_option("model", sa.model, "Model directory")->required();
  scenegen->add_option("--count,-n", sa.count, "Number of scenes")->capture_default_str();
  scenegen->add_option("--first", sa.first, "Index of the first scene")->capture_default_str();
  scenegen->add_option("--seed", sa.seed, "Random seed")->capture_default_str();
  scenegen->add_option("--out,-o", sa.out, "Dataset directory")->required();

  EstimateArgs ea;
  auto* estimate = app.add_subcommand("estimate", "Estimate the pose of the target in one scene");
  estimate->add_option("scene", ea.scene, "Scene directory")->required();
  estimate->add_option("model", ea.model, "Model directory")->required();
  estimate->add_option("--method", ea.method, "Correspondence and solver pipeline")
      ->check(CLI::IsMember({"oracle-c2f", "oracle-classic", "fpfh"}))
      ->capture_default_str();
  estimate->add_option("--noise", ea.noise, "Point jitter as a fraction of the diameter")
      ->capture_default_str();
  estimate->add_option("--vote-threshold", ea.vote_threshold, "Keypoint vote threshold in (0,1]");
  estimate->add_option("--seed", ea.seed, "Random seed")->capture_default_str();
  estimate->add_option("--workers", ea.workers, "RANSAC worker threads (0: all cores)");
  estimate->add_option("--config", ea.config, "JSON file with pipeline overrides");
  estimate->add_option("--out,-o", ea.out, "Write the pose JSON here instead of stdout");

  EvalArgs va;
  auto* eval = app.add_subcommand("eval", "Score a pose JSON against the scene ground truth");
  eval->add_option("pose", va.pose, "Pose JSON from estimate")->required();
  eval->add_option("scene", va.scene, "Scene directory")->required();
  eval->add_option("model", va.model, "Model directory")->required();
  eval->add_option("--tau", va.tau, "Threshold as a fraction of the diameter")->capture_default_str();

  BenchArgs ba;
  auto* bench = app.add_subcommand("bench", "Run the benchmark grid from a JSON config");
  bench->add_option("config", ba.config, "Benchmark config JSON")->required();
  bench->add_option("--out,-o", ba.out, "Output directory (overrides the config)");
  bench->add_flag("--resume", ba.resume, "Skip scenes already in results.csv");
  bench->add_option("--seed", ba.seed, "Master seed (overrides the config)");
  bench->add_option("--workers", ba.workers, "Worker threads (overrides the config)");

  std::string shapes_dir;
  auto* shapes_cmd = app.add_subcommand("shapes", "Write the shipped test meshes as OBJ files");
  shapes_cmd->add_option("--out,-o", shapes_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*model) return cmd_model(ma, out);
    if (*scenegen) return cmd_scenegen(sa, out);
    if (*estimate) return cmd_estimate(ea, out);
    if (*eval) return cmd_eval(va, out);
    if (*bench) return cmd_bench(ba, out, err);
    if (*shapes_cmd) return cmd_shapes(shapes_dir, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    switch (e.kind()) {
      case ErrorKind::kUsage: return kExitUsage;
      case ErrorKind::kIo:
      case ErrorKind::kParse: return kExitIo;
      case ErrorKind::kDegenerate:
      case ErrorKind::kInvalidArgument: return kExitDegenerate;
    }
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace kpose
