#pragma once

#include <optional>

#include <Eigen/Core>
#include <Eigen/SVD>

#include "kpose/core/error.hpp"
#include "kpose/core/rigid_transform.hpp"

namespace kpose {

/// Weighted least-squares rigid alignment of paired 3xN point sets:
/// argmin_{R,t} sum_i w_i |R src_i + t - dst_i|^2 with det(R) = +1.
/// Returns nullopt for mismatched sizes, fewer than three points,
/// non-positive total weight, or (near-)collinear source/target sets.
template <typename SrcDerived, typename DstDerived>
std::optional<RigidTransform<typename SrcDerived::Scalar>> try_kabsch(
    const Eigen::MatrixBase<SrcDerived>& src, const Eigen::MatrixBase<DstDerived>& dst,
    const Eigen::Matrix<typename SrcDerived::Scalar, Eigen::Dynamic, 1>* weights = nullptr) {
  using Scalar = typename SrcDerived::Scalar;
  using Vector3 = Eigen::Matrix<Scalar, 3, 1>;
  using Matrix3 = Eigen::Matrix<Scalar, 3, 3>;
  static_assert(SrcDerived::RowsAtCompileTime == 3 || SrcDerived::RowsAtCompileTime == Eigen::Dynamic);

  const Eigen::Index n = src.cols();
  if (src.rows() != 3 || dst.rows() != 3 || dst.cols() != n || n < 3) return std::nullopt;
  if (weights && weights->size() != n) return std::nullopt;

  Scalar total = 0;
  Vector3 src_mean = Vector3::Zero(), dst_mean = Vector3::Zero();
  for (Eigen::Index i = 0; i < n; ++i) {
    const Scalar w = weights ? (*weights)(i) : Scalar(1);
    total += w;
    src_mean += w * src.col(i);
    dst_mean += w * dst.col(i);
  }
  if (!(total > 0)) return std::nullopt;
  src_mean /= total;
  dst_mean /= total;

  Matrix3 cov = Matrix3::Zero();
  Matrix3 src_cov = Matrix3::Zero();
  for (Eigen::Index i = 0; i < n; ++i) {
    const Scalar w = weights ? (*weights)(i) : Scalar(1);
    const Vector3 a = src.col(i) - src_mean;
    cov.noalias() += w * (dst.col(i) - dst_mean) * a.transpose();
    src_cov.noalias() += w * a * a.transpose();
  }

  // Collinear (or coincident) sources leave the rotation about their line
  // undetermined.
  Eigen::JacobiSVD<Matrix3> spread(src_cov);
  const Vector3 sv = spread.singularValues();
  const Scalar eps = Scalar(1e-12);
  if (!(sv(0) > 0) || sv(1) <= eps * sv(0)) return std::nullopt;

  Eigen::JacobiSVD<Matrix3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vector3 s = svd.singularValues();
  if (!(s(0) > 0) || s(1) <= eps * s(0)) return std::nullopt;
  Matrix3 d = Matrix3::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0) d(2, 2) = -1;
  const Matrix3 r = svd.matrixU() * d * svd.matrixV().transpose();
  return RigidTransform<Scalar>(r, dst_mean - r * src_mean);
}

/// Throwing form of try_kabsch; degenerate input raises DegenerateError.
template <typename SrcDerived, typename DstDerived>
RigidTransform<typename SrcDerived::Scalar> kabsch(
    const Eigen::MatrixBase<SrcDerived>& src, const Eigen::MatrixBase<DstDerived>& dst,
    const Eigen::Matrix<typename SrcDerived::Scalar, Eigen::Dynamic, 1>* weights = nullptr) {
  if (src.cols() != dst.cols()) throw InvalidArgument("kabsch: point count mismatch");
  if (src.cols() < 3) throw InvalidArgument("kabsch: needs at least 3 point pairs");
  auto t = try_kabsch(src, dst, weights);
  if (!t) throw DegenerateError("degenerate configuration");
  return *t;
}

}  // namespace kpose
