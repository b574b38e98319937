#pragma once

#include <cmath>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "kpose/core/error.hpp"
#include "kpose/core/rigid_transform.hpp"

namespace kpose {

using Index = Eigen::Index;

template <typename Scalar>
using Points3 = Eigen::Matrix<Scalar, 3, Eigen::Dynamic>;

/// Positions plus optional unit normals, one column per point. `normals`
/// is either empty or has exactly as many columns as `points`.
template <typename Scalar_>
struct PointCloud {
  using Scalar = Scalar_;
  using Matrix = Points3<Scalar>;
  using Vector3 = Eigen::Matrix<Scalar, 3, 1>;

  Matrix points;
  Matrix normals;

  PointCloud() = default;
  explicit PointCloud(Matrix pts) : points(std::move(pts)) {}
  PointCloud(Matrix pts, Matrix nrm)
      : points(std::move(pts)), normals(std::move(nrm)) {
    if (normals.cols() != 0 && normals.cols() != points.cols())
      throw InvalidArgument("normal count does not match point count");
  }

  Index size() const { return points.cols(); }
  bool empty() const { return points.cols() == 0; }
  bool has_normals() const {
    return normals.cols() != 0 && normals.cols() == points.cols();
  }

  auto point(Index i) const { return points.col(i); }
  auto normal(Index i) const { return normals.col(i); }

  /// Checks finiteness, normal count and unit length.
  bool is_valid(Scalar unit_tol = Scalar(1e-6)) const {
    if (!points.allFinite()) return false;
    if (normals.cols() == 0) return true;
    if (normals.cols() != points.cols() || !normals.allFinite()) return false;
    for (Index i = 0; i < normals.cols(); ++i)
      if (std::abs(normals.col(i).norm() - Scalar(1)) > unit_tol) return false;
    return true;
  }

  PointCloud select(std::span<const Index> indices) const {
    PointCloud out;
    out.points.resize(3, static_cast<Index>(indices.size()));
    if (has_normals()) out.normals.resize(3, out.points.cols());
    for (Index j = 0; j < out.points.cols(); ++j) {
      out.points.col(j) = points.col(indices[static_cast<std::size_t>(j)]);
      if (has_normals())
        out.normals.col(j) = normals.col(indices[static_cast<std::size_t>(j)]);
    }
    return out;
  }

  template <typename NewScalar>
  PointCloud<NewScalar> cast() const {
    return {points.template cast<NewScalar>(),
            normals.template cast<NewScalar>()};
  }
};

using PointCloudd = PointCloud<double>;
using PointCloudf = PointCloud<float>;

/// p -> R p + t, n -> R n.
template <typename Scalar>
PointCloud<Scalar> apply_transform(const RigidTransform<Scalar>& t,
                                   const PointCloud<Scalar>& c) {
  PointCloud<Scalar> out;
  out.points = t.apply_points(c.points);
  if (c.normals.cols() != 0) out.normals = t.rotation * c.normals;
  return out;
}

template <typename Scalar>
PointCloud<Scalar> concatenate(const PointCloud<Scalar>& a,
                               const PointCloud<Scalar>& b) {
  PointCloud<Scalar> out;
  out.points.resize(3, a.size() + b.size());
  out.points << a.points, b.points;
  const bool a_ok = a.has_normals() || a.empty();
  const bool b_ok = b.has_normals() || b.empty();
  if (a_ok && b_ok && (a.has_normals() || b.has_normals())) {
    out.normals.resize(3, a.size() + b.size());
    out.normals << a.normals, b.normals;
  }
  return out;
}

}  // namespace kpose
