#pragma once

// Independent object motion from the residual between observed flow and a
// predicted egomotion field: an average-threshold filter conjoined with a
// multistage divisive max normalization gated by normalized depth.

#include <vector>

#include "mfgvo/geometry.hpp"

namespace mfgvo {

struct ObjMotionParams {
  double theta_d = 1.5;
  double theta_p = 0.5;
  /// Fraction of the frame's maximum depth; nearer pixels may be objects.
  double depth_gate = 0.2;

  void validate() const;
};

struct ObjectResult {
  FlowField residual;
  Mask mask;
  FlowField velocity;
};

/// r(p) = flow(p) - (rho(p) v_t(p) + v_w(p)).
FlowField residual(const FlowField& flow, const FlowField& v_t,
                   const FlowField& v_w, const InverseDepthMap& rho);

/// |r|^2 > theta_d * mean(tanh(|r|^2)), strict.
Mask filter1(const FlowField& r, double theta_d);

/// Depth normalized to [0, 1] by the frame maximum. rho = 0 pixels take the
/// largest finite depth (or 1 when every pixel is at infinity).
Grid<double> normalized_depth(const InverseDepthMap& rho);

/// Intermediate stages of filter2, exposed for inspection.
struct Filter2Stages {
  Grid<double> r_prime;  // |r|^2 / max |r|^2
  Grid<double> r_dprime; // renormalized r' * tanh(d)^2
  Grid<double> r_s;      // r'' / (1 + (max r'' - r'')^2)
  Mask mask;
};

Filter2Stages filter2_stages(const FlowField& r, const Grid<double>& depth,
                             double theta_p, double depth_gate);
/// (r_s > theta_p * mean(r_s)) AND (d < depth_gate); all false when the
/// residual or the depth-weighted residual has zero maximum.
Mask filter2(const FlowField& r, const Grid<double>& depth, double theta_p,
             double depth_gate);

/// residual -> filter1 AND filter2 -> residual restricted to the mask.
ObjectResult extract_object_motion(const FlowField& flow, const FlowField& v_t,
                                   const FlowField& v_w,
                                   const InverseDepthMap& rho,
                                   const ObjMotionParams& params = {});

}  // namespace mfgvo
