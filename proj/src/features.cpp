#include "kpose/features.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "kpose/core/error.hpp"
#include "kpose/core/geometry.hpp"
#include "kpose/core/io.hpp"
#include "kpose/core/kd_tree.hpp"
#include "kpose/core/parallel.hpp"

namespace kpose {
namespace {

int bin_of(double value, double lo, double hi) {
  const int b = static_cast<int>(std::floor(kFpfhBinsPerFeature * (value - lo) / (hi - lo)));
  return std::clamp(b, 0, kFpfhBinsPerFeature - 1);
}

void normalize_blocks(Eigen::Ref<FpfhDescriptor> h) {
  for (int f = 0; f < 3; ++f) {
    auto block = h.segment<kFpfhBinsPerFeature>(f * kFpfhBinsPerFeature);
    const double sum = block.sum();
    if (sum > 0) block *= 100.0 / sum;
  }
}

}  // namespace

PairFeatures pair_features(const Eigen::Vector3d& p1, const Eigen::Vector3d& n1,
                           const Eigen::Vector3d& p2, const Eigen::Vector3d& n2) {
  Eigen::Vector3d dp = p2 - p1;
  const double d = dp.norm();
  if (d == 0) return {0, 0, 0, 0};
  Eigen::Vector3d ns = n1, nt = n2;
  const double a1 = ns.dot(dp) / d;
  const double a2 = nt.dot(dp) / d;
  // Source is the point whose normal is closer to the connecting line. On a
  // tie (parallel facets) rounding would decide, so take the orientation
  // with non-negative phi instead.
  const bool tie = std::abs(std::abs(a1) - std::abs(a2)) <= 1e-9;
  if (tie ? -a2 > a1 : std::abs(a1) < std::abs(a2)) {
    std::swap(ns, nt);
    dp = -dp;
  }
  const Eigen::Vector3d u = ns;
  Eigen::Vector3d v = dp.cross(u);
  const double vn = v.norm();
  if (vn == 0) return {0, 0, u.dot(dp) / d, d};
  v /= vn;
  const Eigen::Vector3d w = u.cross(v);
  double theta = std::atan2(w.dot(nt), u.dot(nt));
  // Opposed normals sit on the +-pi seam where rounding picks the side.
  if (theta <= -M_PI + 1e-9) theta = M_PI;
  return {theta, v.dot(nt), u.dot(dp) / d, d};
}

FeatureCloud compute_fpfh(const PointCloudd& c, double radius, unsigned workers) {
  if (!(radius > 0)) throw InvalidArgument("FPFH radius must be positive");
  FeatureCloud out;
  out.cloud = c;
  out.descriptors = FpfhMatrix::Zero(kFpfhBins, c.size());
  if (c.empty()) return out;
  if (!c.has_normals()) throw InvalidArgument("FPFH requires normals");

  const KdTreed tree(c.points);
  std::vector<std::vector<Neighbor<double>>> nbrs(static_cast<std::size_t>(c.size()));
  FpfhMatrix spfh = FpfhMatrix::Zero(kFpfhBins, c.size());

  parallel_for(c.size(), workers, [&](Index begin, Index end) {
    for (Index i = begin; i < end; ++i) {
      auto& list = nbrs[static_cast<std::size_t>(i)];
      for (const auto& nb : tree.radius(c.points.col(i), radius))
        if (nb.squared_distance > 0) list.push_back(nb);
      if (list.empty()) continue;
      const double inc = 100.0 / static_cast<double>(list.size());
      auto h = spfh.col(i);
      for (const auto& nb : list) {
        const auto f = pair_features(c.points.col(i), c.normals.col(i), c.points.col(nb.index),
                                     c.normals.col(nb.index));
        h(bin_of(f.theta, -M_PI, M_PI)) += inc;
        h(kFpfhBinsPerFeature + bin_of(f.alpha, -1.0, 1.0)) += inc;
        h(2 * kFpfhBinsPerFeature + bin_of(f.phi, -1.0, 1.0)) += inc;
      }
    }
  });

  parallel_for(c.size(), workers, [&](Index begin, Index end) {
    for (Index i = begin; i < end; ++i) {
      const auto& list = nbrs[static_cast<std::size_t>(i)];
      if (list.empty()) continue;
      FpfhDescriptor acc = FpfhDescriptor::Zero();
      for (const auto& nb : list) acc += spfh.col(nb.index) / std::sqrt(nb.squared_distance);
      FpfhDescriptor h = spfh.col(i) + acc / static_cast<double>(list.size());
      normalize_blocks(h);
      out.descriptors.col(i) = h;
    }
  });
  for (Index i = 0; i < c.size(); ++i)
    if (nbrs[static_cast<std::size_t>(i)].empty()) out.isolated.push_back(i);
  return out;
}

double default_fpfh_radius(const PointCloudd& object_cloud) {
  return 5.0 * mean_spacing(object_cloud);
}

CorrespondenceSet match_features(const FeatureCloud& scene, const FeatureCloud& object,
                                 bool mutual) {
  CorrespondenceSet corr;
  const Index ns = scene.size(), no = object.size();
  if (ns == 0 || no == 0) return corr;

  // Squared L2 from explicit differences: d(a, b) == d(b, a) bit for bit, so
  // swapping the arguments yields the mirrored pair set.
  Eigen::MatrixXd dist(ns, no);
  for (Index j = 0; j < no; ++j)
    dist.col(j) = (scene.descriptors.colwise() - object.descriptors.col(j))
                      .colwise()
                      .squaredNorm()
                      .transpose();

  std::vector<Index> scene_best(static_cast<std::size_t>(ns)), object_best(static_cast<std::size_t>(no));
  for (Index i = 0; i < ns; ++i) dist.row(i).minCoeff(&scene_best[static_cast<std::size_t>(i)]);
  if (mutual)
    for (Index j = 0; j < no; ++j) dist.col(j).minCoeff(&object_best[static_cast<std::size_t>(j)]);

  for (Index i = 0; i < ns; ++i) {
    const Index j = scene_best[static_cast<std::size_t>(i)];
    if (mutual && object_best[static_cast<std::size_t>(j)] != i) continue;
    corr.pairs.push_back({i, j, 1.0});
  }
  return corr;
}

void write_feature_csv(const std::filesystem::path& path, const FeatureCloud& features) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  for (Index i = 0; i < features.size(); ++i) {
    for (int b = 0; b < kFpfhBins; ++b) {
      if (b) out << ',';
      out << format_real(features.descriptors(b, i));
    }
    out << '\n';
  }
}

}  // namespace kpose
