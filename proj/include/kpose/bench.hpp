#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "kpose/metrics.hpp"
#include "kpose/pipeline.hpp"

namespace kpose {

/// An object of the benchmark grid: a shipped shape name or a mesh file.
struct ObjectSource {
  std::string id;
  std::filesystem::path mesh;  // empty: shipped shape `id`
};

struct BenchmarkConfig {
  std::vector<ObjectSource> objects;
  Index scenes_per_object = 100;
  int min_instances = 1;
  int max_instances = kMaxInstances;
  std::vector<double> noise_levels{0.0, 0.01, 0.05};
  std::vector<Method> methods{kAllMethods, kAllMethods + 3};
  PipelineConfig pipeline;
  BinSpec bin;
  Index keypoints = 100;
  double tau = kDefaultAdiThreshold;
  std::filesystem::path output = "bench_out";
  std::uint64_t seed = 0;
  unsigned workers = 0;  // scene-level pool; 0: hardware concurrency

  void validate() const;
  /// Every field is optional. Mesh paths resolve against `base_dir`.
  static BenchmarkConfig from_json(const Json& j, const std::string& source,
                                   const std::filesystem::path& base_dir);
  static BenchmarkConfig load(const std::filesystem::path& path);
  Json to_json() const;

  /// Instance count of the k-th scene: cycles min..max.
  int instances_for(Index scene) const;
};

struct BenchRow {
  std::string object_id;
  Index scene_id = 0;
  double noise_level = 0;
  Method method = Method::kOracleC2f;
  double adi = 0;
  double add = 0;
  bool correct = false;
  double runtime_ms = 0;

  /// CSV line without the trailing newline.
  std::string csv() const;
  static BenchRow parse(const std::string& line, const std::string& source, long line_no);
};

inline constexpr const char* kBenchCsvHeader =
    "object_id,scene_id,noise_level,method,adi,add,correct,runtime_ms";

struct RecallCell {
  std::string object_id;
  Method method = Method::kOracleC2f;
  double noise_level = 0;
  Index scenes = 0;
  Index correct = 0;

  double recall() const { return scenes ? static_cast<double>(correct) / scenes : 0.0; }
};

struct TimingStats {
  Method method = Method::kOracleC2f;
  Index count = 0;
  double mean = 0, p50 = 0, p90 = 0, p99 = 0;
};

struct BenchmarkSummary {
  /// Sorted by object (config order), method, noise.
  std::vector<RecallCell> cells;
  std::vector<TimingStats> timing;

  const RecallCell* find(const std::string& object, Method m, double noise) const;
  /// Mean of the per-object recalls for one method and noise level.
  double mean_recall(Method m, double noise) const;
  Json to_json() const;
  /// Fixed-width text table of the recall grid and runtime percentiles.
  std::string table() const;
};

BenchmarkSummary summarize(const std::vector<BenchRow>& rows, const BenchmarkConfig& cfg);

struct BenchmarkReport {
  std::vector<BenchRow> rows;  // canonical order
  BenchmarkSummary summary;
  Index scenes_run = 0;
  Index scenes_skipped = 0;
  Index failures = 0;
};

/// Runs the grid and writes <output>/results.csv, summary.json and
/// config.json. With `resume`, scenes whose rows are all present in an
/// existing results.csv are skipped; partial scenes and a truncated last
/// line are discarded and recomputed. Progress and failures go to `log`.
BenchmarkReport run_benchmark(const BenchmarkConfig& cfg, bool resume, std::ostream* log);

/// Reads a results CSV written by run_benchmark.
std::vector<BenchRow> read_bench_csv(const std::filesystem::path& path);

}  // namespace kpose
