#include "kpose/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <random>
#include <set>

#include "kpose/core/error.hpp"
#include "kpose/core/geometry.hpp"
#include "kpose/core/kd_tree.hpp"
#include "kpose/core/random.hpp"

namespace kpose {

Eigen::Matrix3Xd ObjectModel::keypoints() const {
  Eigen::Matrix3Xd out(3, keypoint_count());
  for (Index j = 0; j < keypoint_count(); ++j)
    out.col(j) = cloud.points.col(keypoint_indices[static_cast<std::size_t>(j)]);
  return out;
}

Eigen::Matrix3Xd ObjectModel::keypoint_normals() const {
  Eigen::Matrix3Xd out(3, keypoint_count());
  for (Index j = 0; j < keypoint_count(); ++j)
    out.col(j) = cloud.normals.col(keypoint_indices[static_cast<std::size_t>(j)]);
  return out;
}

void ObjectModel::validate() const {
  if (cloud.size() != kObjectCloudSize)
    throw InvalidArgument("object cloud must have " + std::to_string(kObjectCloudSize) +
                          " points");
  if (!cloud.has_normals()) throw InvalidArgument("object cloud lacks normals");
  if (!(diameter > 0)) throw InvalidArgument("object diameter must be positive");
  std::vector<Index> sorted = keypoint_indices;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw InvalidArgument("duplicate keypoint index");
  if (!sorted.empty() && (sorted.front() < 0 || sorted.back() >= cloud.size()))
    throw InvalidArgument("keypoint index out of range");
}

double packing_radius(double area, Index n) {
  return std::sqrt(area / (2.0 * std::sqrt(3.0) * static_cast<double>(n)));
}

PointCloudd poisson_sample(const TriangleMesh& mesh, Index n, std::uint64_t seed) {
  if (n < 4) throw InvalidArgument("poisson_sample needs n >= 4");
  mesh.validate();

  // Area-weighted uniform oversampling.
  const Index m = 8 * n;
  std::vector<double> cumulative(static_cast<std::size_t>(mesh.triangle_count()));
  double total = 0;
  for (Index t = 0; t < mesh.triangle_count(); ++t) {
    total += mesh.face_area(t);
    cumulative[static_cast<std::size_t>(t)] = total;
  }
  Rng rng = make_rng(seed, 0);
  Eigen::Matrix3Xd pts(3, m), nrm(3, m);
  for (Index i = 0; i < m; ++i) {
    const double pick = uniform_unit(rng) * total;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), pick);
    if (it == cumulative.end()) --it;
    const Index t = it - cumulative.begin();
    double u = uniform_unit(rng), v = uniform_unit(rng);
    if (u + v > 1) {
      u = 1 - u;
      v = 1 - v;
    }
    const Eigen::Vector3d a = mesh.corner(t, 0);
    pts.col(i) = a + u * (mesh.corner(t, 1) - a) + v * (mesh.corner(t, 2) - a);
    nrm.col(i) = mesh.face_cross(t).normalized();
  }

  // Weighted sample elimination: repeatedly drop the sample with the most
  // crowded neighborhood until n remain.
  const double r_max = packing_radius(total, n);
  const double reach = 2 * r_max;
  const KdTreed tree(pts);
  std::vector<std::vector<std::pair<Index, double>>> nbrs(static_cast<std::size_t>(m));
  std::vector<double> weight(static_cast<std::size_t>(m), 0.0);
  for (Index i = 0; i < m; ++i) {
    for (const auto& nb : tree.radius(pts.col(i), reach)) {
      if (nb.index == i) continue;
      const double w = std::pow(1.0 - std::sqrt(nb.squared_distance) / reach, 8);
      nbrs[static_cast<std::size_t>(i)].emplace_back(nb.index, w);
      weight[static_cast<std::size_t>(i)] += w;
    }
  }
  std::set<std::pair<double, Index>, std::greater<>> heap;
  for (Index i = 0; i < m; ++i) heap.emplace(weight[static_cast<std::size_t>(i)], i);
  std::vector<char> alive(static_cast<std::size_t>(m), 1);
  for (Index remaining = m; remaining > n; --remaining) {
    const auto [w, victim] = *heap.begin();
    heap.erase(heap.begin());
    alive[static_cast<std::size_t>(victim)] = 0;
    for (const auto& [j, wij] : nbrs[static_cast<std::size_t>(victim)]) {
      if (!alive[static_cast<std::size_t>(j)]) continue;
      auto& wj = weight[static_cast<std::size_t>(j)];
      heap.erase({wj, j});
      wj -= wij;
      heap.emplace(wj, j);
    }
  }

  PointCloudd out;
  out.points.resize(3, n);
  out.normals.resize(3, n);
  Index k = 0;
  for (Index i = 0; i < m; ++i) {
    if (!alive[static_cast<std::size_t>(i)]) continue;
    out.points.col(k) = pts.col(i);
    out.normals.col(k) = nrm.col(i);
    ++k;
  }
  return out;
}

FpsTrace farthest_point_sample_trace(const PointCloudd& c, Index k, std::uint64_t seed) {
  if (k < 1) throw InvalidArgument("k must be at least 1");
  if (k > c.size()) throw InvalidArgument("k exceeds cloud size");
  FpsTrace trace;
  trace.indices.reserve(static_cast<std::size_t>(k));
  trace.gaps.reserve(static_cast<std::size_t>(k));

  Rng rng = make_rng(seed, 0);
  Index current = static_cast<Index>(uniform_index(rng, static_cast<std::uint64_t>(c.size())));
  Eigen::ArrayXd gap = Eigen::ArrayXd::Constant(c.size(), std::numeric_limits<double>::infinity());
  double current_gap = std::numeric_limits<double>::infinity();
  for (Index s = 0; s < k; ++s) {
    trace.indices.push_back(current);
    trace.gaps.push_back(current_gap);
    gap = gap.min((c.points.colwise() - c.points.col(current)).colwise().norm().transpose().array());
    Index next = 0;
    current_gap = gap.maxCoeff(&next);  // first maximum: lowest index wins
    current = next;
  }
  trace.covering_radius = current_gap;
  return trace;
}

std::vector<Index> farthest_point_sample(const PointCloudd& c, Index k, std::uint64_t seed) {
  return farthest_point_sample_trace(c, k, seed).indices;
}

PointCloudd add_noise(const PointCloudd& c, const NoiseSpec& spec, double diameter,
                      const NormalOptions<double>& normals) {
  if (spec.sigma_fraction < 0) throw InvalidArgument("sigma_fraction must be >= 0");
  if (spec.sigma_fraction == 0 || c.empty()) return c;
  const double sigma = spec.sigma_fraction * diameter;
  Rng rng = make_rng(spec.seed, 0);
  std::normal_distribution<double> gauss(0.0, sigma);
  PointCloudd noisy(c.points);
  for (Index i = 0; i < noisy.size(); ++i)
    for (int a = 0; a < 3; ++a) noisy.points(a, i) += gauss(rng);
  if (noisy.size() < std::max<Index>(3, normals.k)) return noisy;
  return estimate_normals(noisy, normals);
}

ObjectModel build_object_model(const TriangleMesh& mesh, Index k_keypoints,
                               std::uint64_t seed) {
  ObjectModel model;
  model.seed = seed;
  model.cloud = poisson_sample(mesh, kObjectCloudSize, derive_seed(seed, 1));
  // Face normals follow the winding; flip everything for inward-wound meshes.
  if (mesh.signed_volume() < 0) model.cloud.normals = -model.cloud.normals;
  model.diameter = diameter(model.cloud);
  model.keypoint_indices = farthest_point_sample(model.cloud, k_keypoints, derive_seed(seed, 2));
  return model;
}

}  // namespace kpose
