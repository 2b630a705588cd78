#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace wfctl::kin {

// Rotation as a unit quaternion, translation in millimetres. Applying the
// transform maps p to R*p + t.
struct RigidTransform {
  Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static RigidTransform identity() { return {}; }
  static RigidTransform from_matrix(const Eigen::Matrix4d& m);
  // Rotation given as a rotation vector in degrees (axis * angle).
  static RigidTransform from_rotation_vector_deg(const Eigen::Vector3d& rotvec_deg,
                                                 const Eigen::Vector3d& translation_mm);

  Eigen::Vector3d apply(const Eigen::Vector3d& p) const { return rotation * p + translation; }
  Eigen::Matrix4d matrix() const;
  Eigen::Vector3d rotation_vector_deg() const;
};

// compose(a, b) applies b first, then a.
RigidTransform compose(const RigidTransform& a, const RigidTransform& b);
RigidTransform invert(const RigidTransform& a);
bool almost_equal(const RigidTransform& a, const RigidTransform& b, double tol);

struct PoseError {
  double translational_mm = 0.0;
  double rotational_deg = 0.0;  // in [0, 180]
};

// Translation distance and the axis-angle magnitude of R_planned^-1 R_measured.
PoseError pose_error(const RigidTransform& planned, const RigidTransform& measured);

}  // namespace wfctl::kin
