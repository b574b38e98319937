#pragma once

#include <limits>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "kpose/core/error.hpp"
#include "kpose/core/kd_tree.hpp"
#include "kpose/core/parallel.hpp"
#include "kpose/core/point_cloud.hpp"

namespace kpose {

enum class NormalOrientation {
  kTowardViewpoint,     // camera-frame scenes
  kAwayFromCentroid,    // closed object clouds
};

template <typename Scalar>
struct NormalOptions {
  Index k = 30;
  NormalOrientation orientation = NormalOrientation::kTowardViewpoint;
  Eigen::Matrix<Scalar, 3, 1> viewpoint = Eigen::Matrix<Scalar, 3, 1>::Zero();
  unsigned workers = 1;
};

/// PCA normals: the smallest-eigenvalue eigenvector of each k-neighborhood
/// covariance, signed by `options.orientation`. Neighborhoods whose points
/// all coincide get +z and are reported in `degenerate` (when given).
template <typename Scalar>
PointCloud<Scalar> estimate_normals(const PointCloud<Scalar>& c,
                                    const NormalOptions<Scalar>& options = {},
                                    std::vector<Index>* degenerate = nullptr) {
  using Vector3 = Eigen::Matrix<Scalar, 3, 1>;
  using Matrix3 = Eigen::Matrix<Scalar, 3, 3>;
  if (options.k < 3) throw InvalidArgument("normal estimation needs k >= 3");
  if (c.size() < options.k)
    throw InvalidArgument("normal estimation needs at least k points");

  const KdTree<Scalar> tree(c.points);
  PointCloud<Scalar> out(c.points);
  out.normals.resize(3, c.size());
  std::vector<char> flags(static_cast<std::size_t>(c.size()), 0);

  Vector3 reference = options.viewpoint;
  if (options.orientation == NormalOrientation::kAwayFromCentroid)
    reference = c.points.rowwise().mean();

  parallel_for(c.size(), options.workers, [&](Index begin, Index end) {
    for (Index i = begin; i < end; ++i) {
      const auto nbrs = tree.knn(c.points.col(i), options.k);
      Vector3 mean = Vector3::Zero();
      for (const auto& n : nbrs) mean += c.points.col(n.index);
      mean /= Scalar(nbrs.size());
      Matrix3 cov = Matrix3::Zero();
      for (const auto& n : nbrs) {
        const Vector3 d = c.points.col(n.index) - mean;
        cov.noalias() += d * d.transpose();
      }
      const Scalar scale = Scalar(1) + mean.squaredNorm();
      if (cov.trace() <= std::numeric_limits<Scalar>::epsilon() *
                             std::numeric_limits<Scalar>::epsilon() * scale) {
        out.normals.col(i) = Vector3::UnitZ();
        flags[static_cast<std::size_t>(i)] = 1;
        continue;
      }
      Eigen::SelfAdjointEigenSolver<Matrix3> solver(cov);
      Vector3 n = solver.eigenvectors().col(0).normalized();
      const Vector3 p = c.points.col(i);
      const Scalar side = options.orientation == NormalOrientation::kTowardViewpoint
                              ? n.dot(reference - p)
                              : n.dot(p - reference);
      if (side < 0) n = -n;
      out.normals.col(i) = n;
    }
  });

  if (degenerate) {
    degenerate->clear();
    for (Index i = 0; i < c.size(); ++i)
      if (flags[static_cast<std::size_t>(i)]) degenerate->push_back(i);
  }
  return out;
}

}  // namespace kpose
