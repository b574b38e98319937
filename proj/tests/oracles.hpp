#pragma once
// Brute-force reference implementations used only by tests. They share no
// code path with the library routines they check.

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include <Eigen/Core>

#include "kpose/core/point_cloud.hpp"
#include "kpose/core/rigid_transform.hpp"

namespace kpose::testing {

struct BruteNeighbor {
  Index index;
  double squared_distance;
};

inline std::vector<BruteNeighbor> brute_sorted(const Eigen::Matrix3Xd& pts,
                                               const Eigen::Vector3d& q) {
  std::vector<BruteNeighbor> all;
  for (Index i = 0; i < pts.cols(); ++i) all.push_back({i, (pts.col(i) - q).squaredNorm()});
  std::stable_sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    return a.squared_distance < b.squared_distance;
  });
  return all;
}

inline std::vector<Index> brute_knn(const Eigen::Matrix3Xd& pts, const Eigen::Vector3d& q,
                                    Index k) {
  auto all = brute_sorted(pts, q);
  std::vector<Index> out;
  for (Index i = 0; i < std::min<Index>(k, static_cast<Index>(all.size())); ++i)
    out.push_back(all[static_cast<std::size_t>(i)].index);
  return out;
}

inline std::vector<Index> brute_radius(const Eigen::Matrix3Xd& pts, const Eigen::Vector3d& q,
                                       double r) {
  std::vector<Index> out;
  for (const auto& n : brute_sorted(pts, q))
    if (n.squared_distance <= r * r) out.push_back(n.index);
  return out;
}

inline double brute_diameter(const Eigen::Matrix3Xd& pts) {
  double best = 0;
  for (Index i = 0; i < pts.cols(); ++i)
    for (Index j = 0; j < pts.cols(); ++j) best = std::max(best, (pts.col(i) - pts.col(j)).norm());
  return best;
}

inline double brute_min_pairwise(const Eigen::Matrix3Xd& pts) {
  double best = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < pts.cols(); ++i)
    for (Index j = i + 1; j < pts.cols(); ++j) best = std::min(best, (pts.col(i) - pts.col(j)).norm());
  return best;
}

/// Textbook greedy farthest point selection from a given start index.
inline std::vector<Index> reference_greedy_fps(const Eigen::Matrix3Xd& pts, Index k, Index start) {
  std::vector<Index> chosen{start};
  while (static_cast<Index>(chosen.size()) < k) {
    Index best = -1;
    double best_d = -1;
    for (Index i = 0; i < pts.cols(); ++i) {
      double d = std::numeric_limits<double>::infinity();
      for (Index c : chosen) d = std::min(d, (pts.col(i) - pts.col(c)).norm());
      if (d > best_d) {
        best_d = d;
        best = i;
      }
    }
    chosen.push_back(best);
  }
  return chosen;
}

inline Eigen::Matrix3Xd random_points(std::mt19937_64& rng, Index n, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Eigen::Matrix3Xd pts(3, n);
  for (Index i = 0; i < n; ++i) pts.col(i) << u(rng), u(rng), u(rng);
  return pts;
}

inline Eigen::Matrix3Xd fibonacci_sphere(Index n, double radius = 1.0) {
  Eigen::Matrix3Xd pts(3, n);
  const double golden = M_PI * (3.0 - std::sqrt(5.0));
  for (Index i = 0; i < n; ++i) {
    const double y = 1.0 - 2.0 * (static_cast<double>(i) + 0.5) / static_cast<double>(n);
    const double r = std::sqrt(1.0 - y * y);
    const double a = golden * static_cast<double>(i);
    pts.col(i) << radius * r * std::cos(a), radius * y, radius * r * std::sin(a);
  }
  return pts;
}

inline RigidTransformd random_pose(std::mt19937_64& rng, double translation_scale = 1.0) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_real_distribution<double> t(-translation_scale, translation_scale);
  return {rotation_from_uniforms(u(rng), u(rng), u(rng)), Eigen::Vector3d(t(rng), t(rng), t(rng))};
}

}  // namespace kpose::testing
