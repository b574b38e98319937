#pragma once

#include <cmath>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace kpose {

/// Proper rigid motion x -> R x + t.
template <typename Scalar_>
struct RigidTransform {
  using Scalar = Scalar_;
  using Matrix3 = Eigen::Matrix<Scalar, 3, 3>;
  using Vector3 = Eigen::Matrix<Scalar, 3, 1>;

  Matrix3 rotation = Matrix3::Identity();
  Vector3 translation = Vector3::Zero();

  RigidTransform() = default;
  RigidTransform(const Matrix3& r, const Vector3& t)
      : rotation(r), translation(t) {}

  static RigidTransform Identity() { return {}; }
  static RigidTransform Translation(const Vector3& t) {
    return {Matrix3::Identity(), t};
  }
  static RigidTransform Rotation(const Matrix3& r) {
    return {r, Vector3::Zero()};
  }
  static RigidTransform AxisAngle(Scalar angle, const Vector3& axis) {
    return Rotation(
        Eigen::AngleAxis<Scalar>(angle, axis.normalized()).toRotationMatrix());
  }

  RigidTransform inverse() const {
    const Matrix3 rt = rotation.transpose();
    return {rt, -(rt * translation)};
  }

  /// Composition: (a * b)(x) == a(b(x)).
  RigidTransform operator*(const RigidTransform& other) const {
    return {rotation * other.rotation,
            rotation * other.translation + translation};
  }

  Vector3 apply_point(const Vector3& p) const {
    return rotation * p + translation;
  }
  Vector3 apply_direction(const Vector3& d) const { return rotation * d; }

  /// Maps every column of a 3xN block.
  template <typename Derived>
  Eigen::Matrix<Scalar, 3, Eigen::Dynamic> apply_points(
      const Eigen::MatrixBase<Derived>& pts) const {
    return (rotation * pts).colwise() + translation;
  }

  Eigen::Matrix<Scalar, 4, 4> matrix() const {
    Eigen::Matrix<Scalar, 4, 4> m = Eigen::Matrix<Scalar, 4, 4>::Identity();
    m.template topLeftCorner<3, 3>() = rotation;
    m.template topRightCorner<3, 1>() = translation;
    return m;
  }

  /// Rotation angle in radians, accurate near zero.
  Scalar rotation_angle() const {
    return Eigen::AngleAxis<Scalar>(Eigen::Quaternion<Scalar>(rotation))
        .angle();
  }

  bool is_valid(Scalar tol = Scalar(1e-6)) const {
    if (!rotation.allFinite() || !translation.allFinite()) return false;
    const Matrix3 err = rotation.transpose() * rotation - Matrix3::Identity();
    return err.cwiseAbs().maxCoeff() < tol &&
           std::abs(rotation.determinant() - Scalar(1)) < tol;
  }

  template <typename NewScalar>
  RigidTransform<NewScalar> cast() const {
    return {rotation.template cast<NewScalar>(),
            translation.template cast<NewScalar>()};
  }
};

using RigidTransformd = RigidTransform<double>;
using RigidTransformf = RigidTransform<float>;

/// Angle of the relative rotation a^-1 b.
template <typename Scalar>
Scalar rotation_distance(const RigidTransform<Scalar>& a,
                         const RigidTransform<Scalar>& b) {
  return RigidTransform<Scalar>::Rotation(a.rotation.transpose() * b.rotation)
      .rotation_angle();
}

/// Uniformly distributed rotation (Haar measure) from three uniforms in [0,1).
template <typename Scalar>
Eigen::Matrix<Scalar, 3, 3> rotation_from_uniforms(Scalar u1, Scalar u2,
                                                   Scalar u3) {
  const Scalar two_pi = Scalar(2 * M_PI);
  const Scalar a = std::sqrt(Scalar(1) - u1);
  const Scalar b = std::sqrt(u1);
  Eigen::Quaternion<Scalar> q(b * std::cos(two_pi * u3),
                              a * std::sin(two_pi * u2),
                              a * std::cos(two_pi * u2),
                              b * std::sin(two_pi * u3));
  return q.normalized().toRotationMatrix();
}

}  // namespace kpose
