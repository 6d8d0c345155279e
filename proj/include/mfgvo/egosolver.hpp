#pragma once

#include <stdexcept>
#include <vector>

#include "mfgvo/geometry.hpp"

namespace mfgvo {

/// Raised when a least-squares system does not pin down all unknowns.
class DegenerateInputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Least-squares t with sum_p |A(p) t - v_t(p)|^2 minimal (unit inverse depth).
Eigen::Vector3d recover_translation(const FlowField& v_t, const CameraModel& cam);
/// Least-squares omega with sum_p |B(p) omega - v_w(p)|^2 minimal.
Eigen::Vector3d recover_rotation(const FlowField& v_w, const CameraModel& cam);

/// Per-pixel minimizer of |rho A t + B omega - v|^2 over rho, clamped to
/// rho >= 0. Pixels where |A t|^2 < 1e-12 (focus of expansion) get 0.
InverseDepthMap depth_from_flow(const FlowField& flow, const EgoMotion& ego,
                                const CameraModel& cam);

struct RobustSolveOptions {
  int coarse_grid = 1000;
  int refine_iters = 20;
  double huber_delta = 0.05;
  double inlier_fraction_floor = 0.5;
};

struct SolveReport {
  /// Unit-norm translation direction and rotation.
  EgoMotion ego;
  double residual_rms = 0.0;
  /// Robust objective at the returned solution.
  double objective = 0.0;
  Mask inlier_mask;
  /// Flow was identically zero; ego is the +z convention.
  bool degenerate = false;
  /// Objective is flat across translation directions (e.g. pure rotation).
  bool translation_ambiguous = false;
};

/// Unit vectors on a Fibonacci lattice covering the sphere.
std::vector<Eigen::Vector3d> fibonacci_sphere(int count);

/// Translation-direction objective: for a fixed unit t, fits omega by
/// Huber-IRLS on the depth-free residuals n(p)^T (B(p) omega - v(p)), where
/// n(p) is the unit normal of A(p) t, and reports the Huber cost.
class SubspaceObjective {
 public:
  SubspaceObjective(const FlowField& flow, const CameraModel& cam,
                    double huber_delta);

  struct Fit {
    Eigen::Vector3d omega = Eigen::Vector3d::Zero();
    double cost = 0.0;
    /// Pixels that contributed (|A t| above the focus-of-expansion cutoff).
    int used = 0;
  };

  Fit evaluate(const Eigen::Vector3d& t, int irls_iters = 6) const;
  /// Cost at a given (t, omega) without refitting omega.
  double cost(const Eigen::Vector3d& t, const Eigen::Vector3d& omega) const;
  /// Per-pixel depth-free residual; NaN where the pixel is unused.
  std::vector<double> residuals(const Eigen::Vector3d& t,
                                const Eigen::Vector3d& omega) const;

 private:
  struct Pixel {
    Eigen::Vector2d p;
    Eigen::Vector2d v;
    Matrix23 B;
  };
  std::vector<Pixel> pixels_;
  double delta_;
};

double huber(double r, double delta);

SolveReport robust_egomotion(const FlowField& flow, const CameraModel& cam,
                             const RobustSolveOptions& opts = {});

}  // namespace mfgvo
