#include "mfgvo/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/SVD>

namespace mfgvo {

CameraModel::CameraModel(double focal, double principal_x, double principal_y,
                         int w, int h)
    : f(focal), cx(principal_x), cy(principal_y), width(w), height(h) {
  if (!(focal > 0.0) || !std::isfinite(focal)) {
    throw std::invalid_argument("camera focal length must be positive");
  }
  if (w < 1 || h < 1) {
    throw std::invalid_argument("camera image size must be at least 1x1");
  }
}

CameraModel CameraModel::centered(double focal, int w, int h) {
  return {focal, 0.5 * (w - 1), 0.5 * (h - 1), w, h};
}

bool is_rotation(const Eigen::Matrix3d& R, double tol) {
  if (!R.allFinite()) return false;
  const double ortho = (R.transpose() * R - Eigen::Matrix3d::Identity())
                           .cwiseAbs()
                           .maxCoeff();
  return ortho <= tol && std::abs(R.determinant() - 1.0) <= tol;
}

Matrix23 a_matrix(const Eigen::Vector2d& p) {
  Matrix23 A;
  A << 1.0, 0.0, -p.x(),
       0.0, 1.0, -p.y();
  return A;
}

Matrix23 b_matrix(const Eigen::Vector2d& p) {
  const double x = p.x();
  const double y = p.y();
  Matrix23 B;
  B << -x * y, 1.0 + x * x, -y,
       -1.0 - y * y, x * y, x;
  return B;
}

namespace {

template <typename PerPixel>
FlowField fill_field(const CameraModel& cam, PerPixel&& fn) {
  FlowField out(cam.width, cam.height);
  for (int r = 0; r < cam.height; ++r) {
    for (int c = 0; c < cam.width; ++c) {
      out(r, c) = fn(r, c, cam.normalized(r, c));
    }
  }
  return out;
}

}  // namespace

FlowField motion_field(const EgoMotion& ego, const InverseDepthMap& rho,
                       const CameraModel& cam) {
  if (!rho.same_shape(cam.width, cam.height)) {
    throw DimensionError("motion_field: inverse depth does not match camera");
  }
  return fill_field(cam, [&](int r, int c, const Eigen::Vector2d& p) {
    return Eigen::Vector2d(rho(r, c) * (a_matrix(p) * ego.t) +
                           b_matrix(p) * ego.omega);
  });
}

FlowField translational_field(const Eigen::Vector3d& t, const CameraModel& cam) {
  return fill_field(cam, [&](int, int, const Eigen::Vector2d& p) {
    return Eigen::Vector2d(a_matrix(p) * t);
  });
}

FlowField rotational_field(const Eigen::Vector3d& omega,
                           const CameraModel& cam) {
  return fill_field(cam, [&](int, int, const Eigen::Vector2d& p) {
    return Eigen::Vector2d(b_matrix(p) * omega);
  });
}

Eigen::Matrix3d skew(const Eigen::Vector3d& w) {
  Eigen::Matrix3d S;
  S << 0.0, -w.z(), w.y(),
       w.z(), 0.0, -w.x(),
       -w.y(), w.x(), 0.0;
  return S;
}

Eigen::Matrix3d so3_exp(const Eigen::Vector3d& omega) {
  const double theta2 = omega.squaredNorm();
  const double theta = std::sqrt(theta2);
  const Eigen::Matrix3d W = skew(omega);
  double a, b;
  if (theta < 1e-6) {
    // Taylor expansions of sin(x)/x and (1-cos(x))/x^2.
    a = 1.0 - theta2 / 6.0;
    b = 0.5 - theta2 / 24.0;
  } else {
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / theta2;
  }
  return Eigen::Matrix3d::Identity() + a * W + b * W * W;
}

Eigen::Vector3d so3_log(const Eigen::Matrix3d& R) {
  if (!is_rotation(R, 1e-6)) {
    throw std::invalid_argument("so3_log: input is not a rotation matrix");
  }
  const double cos_theta = std::clamp(0.5 * (R.trace() - 1.0), -1.0, 1.0);
  const Eigen::Vector3d vee(R(2, 1) - R(1, 2), R(0, 2) - R(2, 0),
                            R(1, 0) - R(0, 1));

  if (cos_theta > 1.0 - 1e-6) {
    // theta small: R - R^T ~ 2 sin(theta) [w]x, sin(theta)/theta ~ 1 - theta^2/6.
    const double sin_theta = 0.5 * vee.norm();
    const double theta = std::asin(std::min(sin_theta, 1.0));
    const double scale = theta < 1e-12 ? 0.5 : 0.5 * theta / sin_theta;
    return scale * vee;
  }
  if (cos_theta < -1.0 + 1e-6) {
    // Near pi the antisymmetric part vanishes; read the axis off the
    // symmetric part, (R + R^T)/2 = cos(theta) I + (1 - cos(theta)) a a^T.
    const Eigen::Matrix3d S =
        (0.5 * (R + R.transpose()) -
         cos_theta * Eigen::Matrix3d::Identity()) / (1.0 - cos_theta);
    int k = 0;
    S.diagonal().maxCoeff(&k);
    Eigen::Vector3d axis = S.col(k) / std::sqrt(std::max(S(k, k), 1e-300));
    axis.normalize();
    const double sin_theta = 0.5 * vee.norm();
    const double theta = std::atan2(sin_theta, cos_theta);
    // Pick the axis sign consistent with the (tiny) antisymmetric part.
    if (axis.dot(vee) < 0.0) axis = -axis;
    return theta * axis;
  }
  const double theta = std::acos(cos_theta);
  return (0.5 * theta / std::sin(theta)) * vee;
}

EgoMotion relative_egomotion(const Pose& a, const Pose& b) {
  const Pose rel = a.inverse().compose(b);
  return {rel.translation, so3_log(rel.R)};
}

Pose apply_egomotion(const Pose& from, const EgoMotion& ego) {
  return from.compose(Pose{so3_exp(ego.omega), ego.t});
}

Trajectory integrate_trajectory(const std::vector<EgoMotion>& motions,
                                const Pose& origin) {
  Trajectory out;
  out.reserve(motions.size() + 1);
  out.push_back(origin);
  for (const auto& m : motions) out.push_back(apply_egomotion(out.back(), m));
  return out;
}

Eigen::Matrix3d orthonormalize(const Eigen::Matrix3d& M) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(M, Eigen::ComputeFullU |
                                               Eigen::ComputeFullV);
  Eigen::Matrix3d U = svd.matrixU();
  const Eigen::Matrix3d V = svd.matrixV();
  if ((U * V.transpose()).determinant() < 0.0) U.col(2) = -U.col(2);
  return U * V.transpose();
}

}  // namespace mfgvo
