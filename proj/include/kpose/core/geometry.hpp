#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Core>

#include "kpose/core/error.hpp"
#include "kpose/core/kd_tree.hpp"
#include "kpose/core/point_cloud.hpp"

namespace kpose {

/// Clouds up to this size get an exact O(n^2) diameter.
inline constexpr Index kExactDiameterLimit = 4096;

template <typename Derived>
typename Derived::Scalar exact_diameter(const Eigen::MatrixBase<Derived>& pts) {
  using Scalar = typename Derived::Scalar;
  Scalar best = 0;
  for (Index i = 0; i < pts.cols(); ++i)
    for (Index j = i + 1; j < pts.cols(); ++j)
      best = std::max(best, (pts.col(i) - pts.col(j)).squaredNorm());
  return std::sqrt(best);
}

/// Maximum pairwise distance. Exact up to kExactDiameterLimit points; larger
/// clouds use the exact diameter of a farthest-point subset of that size.
template <typename Scalar>
Scalar diameter(const PointCloud<Scalar>& c) {
  if (c.empty()) return 0;
  if (c.size() <= kExactDiameterLimit) return exact_diameter(c.points);

  std::vector<Scalar> gap(static_cast<std::size_t>(c.size()),
                          std::numeric_limits<Scalar>::max());
  Points3<Scalar> subset(3, kExactDiameterLimit);
  Index current = 0;
  for (Index s = 0; s < kExactDiameterLimit; ++s) {
    subset.col(s) = c.points.col(current);
    Index next = 0;
    Scalar far = -1;
    for (Index i = 0; i < c.size(); ++i) {
      auto& g = gap[static_cast<std::size_t>(i)];
      g = std::min(g, (c.points.col(i) - c.points.col(current)).squaredNorm());
      if (g > far) {
        far = g;
        next = i;
      }
    }
    current = next;
  }
  return exact_diameter(subset);
}

/// Mean distance from each point to its nearest other point.
template <typename Scalar>
Scalar mean_spacing(const PointCloud<Scalar>& c) {
  if (c.size() < 2) return 0;
  const KdTree<Scalar> tree(c.points);
  Scalar sum = 0;
  for (Index i = 0; i < c.size(); ++i) {
    const auto nbrs = tree.knn(c.points.col(i), 2);
    sum += std::sqrt(nbrs[1].squared_distance);
  }
  return sum / Scalar(c.size());
}

template <typename Scalar>
Eigen::Matrix<Scalar, 3, 1> centroid(const PointCloud<Scalar>& c) {
  if (c.empty()) throw InvalidArgument("empty input");
  return c.points.rowwise().mean();
}

}  // namespace kpose
