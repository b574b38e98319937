#include "kpose/bench.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <iterator>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

#include "kpose/core/error.hpp"
#include "kpose/core/io.hpp"
#include "kpose/core/parallel.hpp"
#include "kpose/core/random.hpp"
#include "kpose/shapes.hpp"

namespace kpose {
namespace {

constexpr int kSceneAttempts = 4;

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(line);
  while (std::getline(in, cur, ',')) out.push_back(cur);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_real(const std::string& s, const std::string& source, long line_no) {
  double v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw ParseError(source, line_no, "bad number '" + s + "'");
  return v;
}

std::string noise_key(double noise) { return format_real(noise); }

double percentile(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) return 0;
  const auto rank = static_cast<std::size_t>(std::ceil(p * static_cast<double>(sorted.size())));
  return sorted[std::clamp<std::size_t>(rank, 1, sorted.size()) - 1];
}

TriangleMesh load_mesh(const ObjectSource& src) {
  if (!src.mesh.empty()) return read_mesh(src.mesh);
  for (auto& [name, mesh] : shapes::shipped())
    if (name == src.id) return mesh;
  throw InvalidArgument("unknown shipped shape '" + src.id + "'");
}

// Writes whole scenes in grid order as they complete.
class OrderedWriter {
 public:
  OrderedWriter(std::ostream& out, std::size_t count) : out_(out), done_(count) {}

  void submit(std::size_t slot, std::vector<BenchRow> rows) {
    std::lock_guard lock(mutex_);
    done_[slot] = std::move(rows);
    ready_.insert(slot);
    while (ready_.count(next_)) {
      for (const auto& r : *done_[next_]) out_ << r.csv() << '\n';
      out_.flush();
      ready_.erase(next_);
      ++next_;
    }
  }

  std::vector<BenchRow> take(std::size_t slot) { return std::move(*done_[slot]); }

 private:
  std::ostream& out_;
  std::mutex mutex_;
  std::vector<std::optional<std::vector<BenchRow>>> done_;
  std::set<std::size_t> ready_;
  std::size_t next_ = 0;
};

struct Unit {
  std::size_t object = 0;
  Index scene = 0;
};

}  // namespace

void BenchmarkConfig::validate() const {
  if (objects.empty()) throw InvalidArgument("benchmark needs at least one object");
  std::set<std::string> ids;
  for (const auto& o : objects) {
    if (o.id.empty()) throw InvalidArgument("object id must not be empty");
    if (o.id.find(',') != std::string::npos) throw InvalidArgument("object id must not contain ','");
    if (!ids.insert(o.id).second) throw InvalidArgument("duplicate object id '" + o.id + "'");
  }
  if (scenes_per_object < 1) throw InvalidArgument("scenes_per_object must be positive");
  if (min_instances < 1 || max_instances > kMaxInstances || min_instances > max_instances)
    throw InvalidArgument("instance range must lie in [1, 20]");
  if (noise_levels.empty()) throw InvalidArgument("noise level list is empty");
  for (double n : noise_levels)
    if (!(n >= 0) || !std::isfinite(n)) throw InvalidArgument("noise levels must be >= 0");
  if (methods.empty()) throw InvalidArgument("method list is empty");
  if (std::set<Method>(methods.begin(), methods.end()).size() != methods.size())
    throw InvalidArgument("duplicate method");
  if (keypoints < 1) throw InvalidArgument("keypoints must be positive");
  if (!(tau > 0)) throw InvalidArgument("tau must be positive");
  pipeline.validate();
  bin.validate();
}

int BenchmarkConfig::instances_for(Index scene) const {
  return min_instances + static_cast<int>(scene % (max_instances - min_instances + 1));
}

BenchmarkConfig BenchmarkConfig::from_json(const Json& j, const std::string& source,
                                           const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw ParseError(source, 0, "config must be a JSON object");
  BenchmarkConfig cfg;
  if (j.contains("objects")) {
    if (!j.at("objects").is_array()) throw ParseError(source, 0, "\"objects\" must be an array");
    cfg.objects.clear();
    std::set<std::string> shipped_names;
    for (const auto& [name, mesh] : shapes::shipped()) shipped_names.insert(name);
    for (const auto& o : j.at("objects")) {
      if (o.is_string()) {
        const std::string s = o.get<std::string>();
        if (shipped_names.count(s)) {
          cfg.objects.push_back({s, {}});
        } else {
          const std::filesystem::path p = base_dir / s;
          cfg.objects.push_back({p.stem().string(), p});
        }
      } else if (o.is_object() && o.contains("id")) {
        ObjectSource src;
        read_field(o, "id", src.id, source);
        std::string mesh;
        read_field(o, "mesh", mesh, source);
        if (!mesh.empty()) src.mesh = base_dir / mesh;
        cfg.objects.push_back(src);
      } else {
        throw ParseError(source, 0, "objects must be names, paths or {\"id\", \"mesh\"}");
      }
    }
  }
  read_field(j, "scenes_per_object", cfg.scenes_per_object, source);
  if (j.contains("instances")) {
    std::vector<int> range;
    read_field(j, "instances", range, source);
    if (range.size() != 2) throw ParseError(source, 0, "\"instances\" must be [min, max]");
    cfg.min_instances = range[0];
    cfg.max_instances = range[1];
  }
  read_field(j, "noise_levels", cfg.noise_levels, source);
  if (j.contains("methods")) {
    std::vector<std::string> names;
    read_field(j, "methods", names, source);
    cfg.methods.clear();
    for (const auto& n : names) cfg.methods.push_back(parse_method(n));
  }
  if (j.contains("pipeline")) cfg.pipeline.merge_json(j.at("pipeline"), source);
  if (j.contains("bin")) {
    const Json& b = j.at("bin");
    read_field(b, "width", cfg.bin.width, source);
    read_field(b, "depth", cfg.bin.depth, source);
    read_field(b, "height", cfg.bin.height, source);
    read_field(b, "wall", cfg.bin.wall, source);
    read_field(b, "surface_spacing", cfg.bin.surface_spacing, source);
    read_field(b, "pixel_angle", cfg.bin.pixel_angle, source);
  }
  read_field(j, "keypoints", cfg.keypoints, source);
  read_field(j, "tau", cfg.tau, source);
  if (j.contains("output")) {
    std::string out;
    read_field(j, "output", out, source);
    cfg.output = base_dir / out;
  }
  read_field(j, "seed", cfg.seed, source);
  read_field(j, "workers", cfg.workers, source);
  return cfg;
}

BenchmarkConfig BenchmarkConfig::load(const std::filesystem::path& path) {
  return from_json(read_json_file(path), path.string(), path.parent_path());
}

Json BenchmarkConfig::to_json() const {
  Json objs = Json::array();
  for (const auto& o : objects) {
    Json e{{"id", o.id}};
    if (!o.mesh.empty()) e["mesh"] = o.mesh.string();
    objs.push_back(e);
  }
  std::vector<std::string> names;
  for (Method m : methods) names.emplace_back(method_name(m));
  return Json{{"objects", objs},
              {"scenes_per_object", scenes_per_object},
              {"instances", {min_instances, max_instances}},
              {"noise_levels", noise_levels},
              {"methods", names},
              {"pipeline", pipeline.to_json()},
              {"bin",
               {{"width", bin.width},
                {"depth", bin.depth},
                {"height", bin.height},
                {"wall", bin.wall},
                {"surface_spacing", bin.surface_spacing},
                {"pixel_angle", bin.pixel_angle}}},
              {"keypoints", keypoints},
              {"tau", tau},
              {"output", output.string()},
              {"seed", seed},
              {"workers", workers}};
}

std::string BenchRow::csv() const {
  std::string s = object_id;
  s += ',' + std::to_string(scene_id);
  s += ',' + noise_key(noise_level);
  s += ',';
  s += method_name(method);
  s += ',' + format_real(adi);
  s += ',' + format_real(add);
  s += correct ? ",1," : ",0,";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", runtime_ms);
  return s + buf;
}

BenchRow BenchRow::parse(const std::string& line, const std::string& source, long line_no) {
  const auto f = split_csv(line);
  if (f.size() != 8) throw ParseError(source, line_no, "expected 8 fields");
  BenchRow r;
  r.object_id = f[0];
  r.scene_id = static_cast<Index>(parse_real(f[1], source, line_no));
  r.noise_level = parse_real(f[2], source, line_no);
  try {
    r.method = parse_method(f[3]);
  } catch (const InvalidArgument& e) {
    throw ParseError(source, line_no, e.what());
  }
  r.adi = parse_real(f[4], source, line_no);
  r.add = parse_real(f[5], source, line_no);
  if (f[6] != "0" && f[6] != "1") throw ParseError(source, line_no, "correct must be 0 or 1");
  r.correct = f[6] == "1";
  r.runtime_ms = parse_real(f[7], source, line_no);
  return r;
}

std::vector<BenchRow> read_bench_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kBenchCsvHeader)
    throw ParseError(path.string(), 1, "missing results header");
  std::vector<BenchRow> rows;
  long n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    rows.push_back(BenchRow::parse(line, path.string(), n));
  }
  return rows;
}

const RecallCell* BenchmarkSummary::find(const std::string& object, Method m, double noise) const {
  for (const auto& c : cells)
    if (c.object_id == object && c.method == m && c.noise_level == noise) return &c;
  return nullptr;
}

double BenchmarkSummary::mean_recall(Method m, double noise) const {
  double sum = 0;
  int n = 0;
  for (const auto& c : cells)
    if (c.method == m && c.noise_level == noise) {
      sum += c.recall();
      ++n;
    }
  return n ? sum / n : 0.0;
}

Json BenchmarkSummary::to_json() const {
  Json cj = Json::array();
  std::vector<Method> methods;
  std::vector<double> noises;
  for (const auto& c : cells) {
    cj.push_back({{"object", c.object_id},
                  {"method", method_name(c.method)},
                  {"noise", c.noise_level},
                  {"scenes", c.scenes},
                  {"correct", c.correct},
                  {"recall", c.recall()}});
    if (std::find(methods.begin(), methods.end(), c.method) == methods.end()) methods.push_back(c.method);
    if (std::find(noises.begin(), noises.end(), c.noise_level) == noises.end()) noises.push_back(c.noise_level);
  }
  Json mean = Json::object();
  for (Method m : methods)
    for (double n : noises) mean[std::string(method_name(m))][noise_key(n)] = mean_recall(m, n);
  Json tj = Json::object();
  for (const auto& t : timing)
    tj[std::string(method_name(t.method))] = {
        {"count", t.count}, {"mean", t.mean}, {"p50", t.p50}, {"p90", t.p90}, {"p99", t.p99}};
  return Json{{"recall", cj}, {"mean_recall", mean}, {"runtime_ms", tj}};
}

std::string BenchmarkSummary::table() const {
  std::vector<std::string> objects;
  std::vector<Method> methods;
  std::vector<double> noises;
  for (const auto& c : cells) {
    if (std::find(objects.begin(), objects.end(), c.object_id) == objects.end()) objects.push_back(c.object_id);
    if (std::find(methods.begin(), methods.end(), c.method) == methods.end()) methods.push_back(c.method);
    if (std::find(noises.begin(), noises.end(), c.noise_level) == noises.end()) noises.push_back(c.noise_level);
  }
  std::string out;
  char buf[128];
  std::snprintf(buf, sizeof buf, "%-16s %-16s", "object", "method");
  out += buf;
  for (double n : noises) {
    std::snprintf(buf, sizeof buf, " %10s", ("noise=" + noise_key(n)).c_str());
    out += buf;
  }
  out += '\n';
  auto row = [&](const std::string& label, Method m, auto&& value) {
    std::snprintf(buf, sizeof buf, "%-16s %-16s", label.c_str(), std::string(method_name(m)).c_str());
    out += buf;
    for (double n : noises) {
      std::snprintf(buf, sizeof buf, " %10.3f", value(n));
      out += buf;
    }
    out += '\n';
  };
  for (const auto& o : objects)
    for (Method m : methods)
      row(o, m, [&](double n) {
        const RecallCell* c = find(o, m, n);
        return c ? c->recall() : 0.0;
      });
  for (Method m : methods) row("mean", m, [&](double n) { return mean_recall(m, n); });
  std::snprintf(buf, sizeof buf, "\n%-16s %8s %10s %10s %10s %10s\n", "runtime_ms", "count", "mean",
                "p50", "p90", "p99");
  out += buf;
  for (const auto& t : timing) {
    std::snprintf(buf, sizeof buf, "%-16s %8ld %10.2f %10.2f %10.2f %10.2f\n",
                  std::string(method_name(t.method)).c_str(), static_cast<long>(t.count), t.mean,
                  t.p50, t.p90, t.p99);
    out += buf;
  }
  return out;
}

BenchmarkSummary summarize(const std::vector<BenchRow>& rows, const BenchmarkConfig& cfg) {
  BenchmarkSummary s;
  for (const auto& o : cfg.objects)
    for (Method m : cfg.methods)
      for (double n : cfg.noise_levels) s.cells.push_back({o.id, m, n, 0, 0});
  std::map<std::tuple<std::string, Method, std::string>, std::size_t> where;
  for (std::size_t i = 0; i < s.cells.size(); ++i)
    where[{s.cells[i].object_id, s.cells[i].method, noise_key(s.cells[i].noise_level)}] = i;
  std::map<Method, std::vector<double>> times;
  for (const auto& r : rows) {
    const auto it = where.find({r.object_id, r.method, noise_key(r.noise_level)});
    if (it == where.end()) continue;
    RecallCell& c = s.cells[it->second];
    ++c.scenes;
    c.correct += r.correct;
    times[r.method].push_back(r.runtime_ms);
  }
  for (Method m : cfg.methods) {
    auto& v = times[m];
    std::sort(v.begin(), v.end());
    TimingStats t;
    t.method = m;
    t.count = static_cast<Index>(v.size());
    if (!v.empty()) {
      double sum = 0;
      for (double x : v) sum += x;
      t.mean = sum / static_cast<double>(v.size());
      t.p50 = percentile(v, 0.50);
      t.p90 = percentile(v, 0.90);
      t.p99 = percentile(v, 0.99);
    }
    s.timing.push_back(t);
  }
  return s;
}

BenchmarkReport run_benchmark(const BenchmarkConfig& cfg, bool resume, std::ostream* log) {
  cfg.validate();
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(cfg.output, ec);
  if (ec || !fs::is_directory(cfg.output))
    throw IoError("cannot create output directory " + cfg.output.string());
  const fs::path csv_path = cfg.output / "results.csv";

  const std::size_t n_objects = cfg.objects.size();
  const std::size_t per_scene = cfg.noise_levels.size() * cfg.methods.size();
  auto unit_slot = [&](std::size_t o, Index k) {
    return o * static_cast<std::size_t>(cfg.scenes_per_object) + static_cast<std::size_t>(k);
  };
  const std::size_t n_units = n_objects * static_cast<std::size_t>(cfg.scenes_per_object);

  // Rows already on disk, grouped by grid slot.
  std::vector<std::vector<BenchRow>> existing(n_units);
  if (resume && fs::exists(csv_path)) {
    std::ifstream in(csv_path, std::ios::binary);
    if (!in) throw IoError("cannot open " + csv_path.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    // A line without its newline was cut short by an interrupted run.
    const auto last_nl = text.rfind('\n');
    text.resize(last_nl == std::string::npos ? 0 : last_nl + 1);
    std::istringstream lines(text);
    std::string line;
    long n = 0;
    std::map<std::string, std::size_t> object_index;
    for (std::size_t o = 0; o < n_objects; ++o) object_index[cfg.objects[o].id] = o;
    while (std::getline(lines, line)) {
      ++n;
      if (n == 1) {
        if (line != kBenchCsvHeader) throw ParseError(csv_path.string(), 1, "missing results header");
        continue;
      }
      if (line.empty()) continue;
      const BenchRow r = BenchRow::parse(line, csv_path.string(), n);
      const auto it = object_index.find(r.object_id);
      if (it == object_index.end() || r.scene_id < 0 || r.scene_id >= cfg.scenes_per_object) continue;
      existing[unit_slot(it->second, r.scene_id)].push_back(r);
    }
  }
  // One row per grid cell; the first occurrence wins.
  auto grid_rows = [&](const std::vector<BenchRow>& rows) {
    std::set<std::pair<std::string, Method>> seen;
    std::vector<BenchRow> kept;
    for (const auto& r : rows) {
      if (std::find(cfg.methods.begin(), cfg.methods.end(), r.method) == cfg.methods.end()) continue;
      if (std::none_of(cfg.noise_levels.begin(), cfg.noise_levels.end(),
                       [&](double x) { return noise_key(x) == noise_key(r.noise_level); }))
        continue;
      if (seen.insert({noise_key(r.noise_level), r.method}).second) kept.push_back(r);
    }
    return kept;
  };

  BenchmarkReport report;
  std::vector<Unit> todo;
  std::vector<std::vector<BenchRow>> final_rows(n_units);
  for (std::size_t o = 0; o < n_objects; ++o)
    for (Index k = 0; k < cfg.scenes_per_object; ++k) {
      const std::size_t slot = unit_slot(o, k);
      auto kept = grid_rows(existing[slot]);
      if (kept.size() == per_scene) {
        final_rows[slot] = std::move(kept);
        ++report.scenes_skipped;
      } else {
        todo.push_back({o, k});
      }
    }

  write_json_file(cfg.output / "config.json", cfg.to_json());

  // Start from the completed scenes, in grid order; new scenes follow.
  {
    std::ofstream out(csv_path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + csv_path.string());
    out << kBenchCsvHeader << '\n';
    for (const auto& rows : final_rows)
      for (const auto& r : rows) out << r.csv() << '\n';
  }

  std::vector<PreparedObject> objects;
  std::vector<bool> needed(n_objects, false);
  for (const auto& u : todo) needed[u.object] = true;
  for (std::size_t o = 0; o < n_objects; ++o) {
    if (!needed[o]) {
      objects.emplace_back();
      continue;
    }
    const ObjectModel model = build_object_model(load_mesh(cfg.objects[o]), cfg.keypoints,
                                                 derive_seed(cfg.seed, 1000 + o));
    objects.push_back(PreparedObject::build(cfg.objects[o].id, model, cfg.pipeline));
  }

  const unsigned workers =
      std::min<unsigned>(resolve_workers(cfg.workers), std::max<std::size_t>(todo.size(), 1));
  PipelineConfig pcfg = cfg.pipeline;
  if (workers > 1) pcfg.ransac.workers = 1;  // parallelism lives at the scene level

  std::ofstream out(csv_path, std::ios::app);
  if (!out) throw IoError("cannot write " + csv_path.string());
  OrderedWriter writer(out, todo.size());
  std::mutex log_mutex;
  std::atomic<Index> failures{0};
  auto note = [&](const std::string& msg) {
    if (!log) return;
    std::lock_guard lock(log_mutex);
    *log << msg << '\n';
  };

  auto run_unit = [&](const Unit& u) {
    const PreparedObject& obj = objects[u.object];
    const std::uint64_t scene_seed = derive_seed(derive_seed(cfg.seed, u.object), u.scene);
    std::vector<BenchRow> rows;
    std::optional<SceneSample> scene;
    std::string scene_error;
    for (int attempt = 0; attempt < kSceneAttempts && !scene; ++attempt) {
      const std::uint64_t s = attempt == 0 ? scene_seed : derive_seed(scene_seed, 100 + attempt);
      try {
        scene = generate_scene(obj.model, cfg.bin, cfg.instances_for(u.scene), s);
      } catch (const DegenerateError& e) {
        scene_error = e.what();
      }
    }
    if (!scene)
      note(obj.id + " scene " + std::to_string(u.scene) + ": scene generation failed: " + scene_error);
    for (std::size_t ni = 0; ni < cfg.noise_levels.size(); ++ni) {
      const double noise = cfg.noise_levels[ni];
      const std::uint64_t noise_seed = derive_seed(scene_seed, 10 + ni);
      PointCloudd observed;
      if (scene) observed = observe_scene(*scene, noise, obj.model.diameter, noise_seed);
      for (Method m : cfg.methods) {
        BenchRow r;
        r.object_id = obj.id;
        r.scene_id = u.scene;
        r.noise_level = noise;
        r.method = m;
        r.adi = r.add = std::numeric_limits<double>::infinity();
        if (scene) {
          const auto res = estimate_pose(obj, *scene, observed, m, pcfg,
                                         derive_seed(noise_seed, 1 + static_cast<int>(m)));
          const auto ev = evaluate_pose(res.estimate.pose, scene->gt_pose, obj.model.cloud,
                                        obj.model.diameter, cfg.tau);
          r.adi = ev.adi;
          r.add = ev.add;
          r.correct = ev.correct && !res.failed;
          r.runtime_ms = res.runtime_ms();
          if (res.failed) ++failures;
        } else {
          ++failures;
        }
        rows.push_back(r);
      }
    }
    return rows;
  };

  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (std::size_t i; (i = next++) < todo.size();) {
      try {
        writer.submit(i, run_unit(todo[i]));
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next = todo.size();
      }
    }
  };
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  if (error) std::rethrow_exception(error);
  out.close();

  for (std::size_t i = 0; i < todo.size(); ++i)
    final_rows[unit_slot(todo[i].object, todo[i].scene)] = writer.take(i);
  report.scenes_run = static_cast<Index>(todo.size());
  report.failures = failures;

  // Rewrite in grid order so a resumed file matches an uninterrupted one.
  const fs::path tmp = cfg.output / "results.csv.tmp";
  {
    std::ofstream final_out(tmp, std::ios::trunc);
    if (!final_out) throw IoError("cannot write " + tmp.string());
    final_out << kBenchCsvHeader << '\n';
    for (auto& rows : final_rows) {
      std::stable_sort(rows.begin(), rows.end(), [&](const BenchRow& a, const BenchRow& b) {
        const auto na = std::find_if(cfg.noise_levels.begin(), cfg.noise_levels.end(),
                                     [&](double x) { return noise_key(x) == noise_key(a.noise_level); });
        const auto nb = std::find_if(cfg.noise_levels.begin(), cfg.noise_levels.end(),
                                     [&](double x) { return noise_key(x) == noise_key(b.noise_level); });
        if (na != nb) return na < nb;
        return std::find(cfg.methods.begin(), cfg.methods.end(), a.method) <
               std::find(cfg.methods.begin(), cfg.methods.end(), b.method);
      });
      for (auto& r : rows) {
        final_out << r.csv() << '\n';
        report.rows.push_back(std::move(r));
      }
    }
  }
  fs::rename(tmp, csv_path, ec);
  if (ec) throw IoError("cannot replace " + csv_path.string());

  report.summary = summarize(report.rows, cfg);
  write_json_file(cfg.output / "summary.json", report.summary.to_json());
  note("scenes run " + std::to_string(report.scenes_run) + ", skipped " +
       std::to_string(report.scenes_skipped) + ", failed estimates " +
       std::to_string(report.failures));
  return report;
}

}  // namespace kpose
