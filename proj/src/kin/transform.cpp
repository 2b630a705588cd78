#include "wfctl/kin/transform.hpp"

#include <cmath>

namespace wfctl::kin {

namespace {

constexpr double kPi = 3.14159265358979323846;

Eigen::Quaterniond normalized_positive(Eigen::Quaterniond q) {
  q.normalize();
  if (q.w() < 0) q.coeffs() *= -1.0;
  return q;
}

}  // namespace

RigidTransform RigidTransform::from_matrix(const Eigen::Matrix4d& m) {
  RigidTransform t;
  t.rotation = normalized_positive(Eigen::Quaterniond(Eigen::Matrix3d(m.topLeftCorner<3, 3>())));
  t.translation = m.topRightCorner<3, 1>();
  return t;
}

RigidTransform RigidTransform::from_rotation_vector_deg(const Eigen::Vector3d& rotvec_deg,
                                                        const Eigen::Vector3d& translation_mm) {
  RigidTransform t;
  double angle = rotvec_deg.norm() * kPi / 180.0;
  if (angle > 0) {
    t.rotation = Eigen::Quaterniond(Eigen::AngleAxisd(angle, rotvec_deg.normalized()));
  }
  t.translation = translation_mm;
  return t;
}

Eigen::Matrix4d RigidTransform::matrix() const {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = rotation.toRotationMatrix();
  m.topRightCorner<3, 1>() = translation;
  return m;
}

Eigen::Vector3d RigidTransform::rotation_vector_deg() const {
  Eigen::AngleAxisd aa(rotation.normalized());
  return aa.axis() * aa.angle() * 180.0 / kPi;
}

RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
  RigidTransform out;
  out.rotation = (a.rotation * b.rotation).normalized();
  out.translation = a.rotation * b.translation + a.translation;
  return out;
}

RigidTransform invert(const RigidTransform& a) {
  RigidTransform out;
  out.rotation = a.rotation.conjugate().normalized();
  out.translation = -(out.rotation * a.translation);
  return out;
}

bool almost_equal(const RigidTransform& a, const RigidTransform& b, double tol) {
  return (a.matrix() - b.matrix()).cwiseAbs().maxCoeff() <= tol;
}

PoseError pose_error(const RigidTransform& planned, const RigidTransform& measured) {
  PoseError e;
  e.translational_mm = (planned.translation - measured.translation).norm();
  // atan2 of the skew and symmetric parts stays accurate near 0 and 180.
  Eigen::Matrix3d r = planned.rotation.toRotationMatrix().transpose() *
                      measured.rotation.toRotationMatrix();
  Eigen::Vector3d skew(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
  double s = 0.5 * skew.norm();
  double c = 0.5 * (r.trace() - 1.0);
  e.rotational_deg = std::atan2(s, c) * 180.0 / kPi;
  return e;
}

}  // namespace wfctl::kin
