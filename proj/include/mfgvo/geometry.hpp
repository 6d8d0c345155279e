#pragma once

#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/LU>

#include "mfgvo/grid.hpp"

namespace mfgvo {

using Matrix23 = Eigen::Matrix<double, 2, 3>;

/// Pinhole intrinsics. All motion-field math runs in normalized coordinates
/// x = (col - cx) / f, y = (row - cy) / f with x rightward and y downward,
/// so the focal length drops out of A(p) and B(p).
struct CameraModel {
  double f = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;

  CameraModel() = default;
  CameraModel(double focal, double principal_x, double principal_y, int w, int h);

  /// Camera whose principal point sits at the image centre.
  static CameraModel centered(double focal, int w, int h);

  Eigen::Vector2d normalized(int row, int col) const {
    return {(col - cx) / f, (row - cy) / f};
  }

  std::size_t pixel_count() const {
    return static_cast<std::size_t>(width) * height;
  }
};

/// Instantaneous camera velocity: translation t (scene units / frame) and
/// rotation omega (rad / frame).
struct EgoMotion {
  Eigen::Vector3d t = Eigen::Vector3d::Zero();
  Eigen::Vector3d omega = Eigen::Vector3d::Zero();
};

/// Camera-to-world rigid transform: x_world = R * x_cam + translation.
struct Pose {
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  Pose compose(const Pose& rhs) const {
    return {R * rhs.R, R * rhs.translation + translation};
  }
  Pose inverse() const {
    return {R.transpose(), -(R.transpose() * translation)};
  }
};

using Trajectory = std::vector<Pose>;

bool is_rotation(const Eigen::Matrix3d& R, double tol = 1e-9);

Matrix23 a_matrix(const Eigen::Vector2d& p);
Matrix23 b_matrix(const Eigen::Vector2d& p);

/// v(p) = rho(p) A(p) t + B(p) omega over the whole image.
FlowField motion_field(const EgoMotion& ego, const InverseDepthMap& rho,
                       const CameraModel& cam);
/// A(p) t at unit inverse depth.
FlowField translational_field(const Eigen::Vector3d& t, const CameraModel& cam);
/// B(p) omega; depth independent.
FlowField rotational_field(const Eigen::Vector3d& omega, const CameraModel& cam);

Eigen::Matrix3d skew(const Eigen::Vector3d& w);
Eigen::Matrix3d so3_exp(const Eigen::Vector3d& omega);
/// Inverse of so3_exp for rotation angles in [0, pi]. Throws
/// std::invalid_argument when R is not a rotation (tolerance 1e-6).
Eigen::Vector3d so3_log(const Eigen::Matrix3d& R);

/// Motion taking pose a to pose b, expressed in a's camera frame.
EgoMotion relative_egomotion(const Pose& a, const Pose& b);
/// Pose reached by applying one frame of `ego` to `from`.
Pose apply_egomotion(const Pose& from, const EgoMotion& ego);
/// Left fold of apply_egomotion; returns motions.size() + 1 poses.
Trajectory integrate_trajectory(const std::vector<EgoMotion>& motions,
                                const Pose& origin = Pose{});

/// Nearest rotation in the Frobenius sense (polar decomposition via SVD).
Eigen::Matrix3d orthonormalize(const Eigen::Matrix3d& M);

}  // namespace mfgvo
