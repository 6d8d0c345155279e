#include "mfgvo/objmotion.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mfgvo {

void ObjMotionParams::validate() const {
  if (!(theta_d > 0.0) || !(theta_p > 0.0)) {
    throw std::invalid_argument("object motion thresholds must be positive");
  }
  if (!(depth_gate > 0.0 && depth_gate <= 1.0)) {
    throw std::invalid_argument("depth gate must lie in (0, 1]");
  }
}

FlowField residual(const FlowField& flow, const FlowField& v_t,
                   const FlowField& v_w, const InverseDepthMap& rho) {
  require_same_shape(flow, v_t, "residual");
  require_same_shape(flow, v_w, "residual");
  require_same_shape(flow, rho, "residual");
  FlowField r(flow.width(), flow.height());
  for (std::size_t i = 0; i < r.size(); ++i) {
    r[i] = flow[i] - (rho[i] * v_t[i] + v_w[i]);
  }
  return r;
}

Mask filter1(const FlowField& r, double theta_d) {
  Mask out(r.width(), r.height(), 0);
  if (r.size() == 0) return out;
  double mean_tanh = 0.0;
  for (const auto& v : r) mean_tanh += std::tanh(v.squaredNorm());
  mean_tanh /= static_cast<double>(r.size());
  const double threshold = theta_d * mean_tanh;
  for (std::size_t i = 0; i < r.size(); ++i) {
    out[i] = r[i].squaredNorm() > threshold ? 1 : 0;
  }
  return out;
}

Grid<double> normalized_depth(const InverseDepthMap& rho) {
  Grid<double> d(rho.width(), rho.height(), 0.0);
  double max_depth = 0.0;
  for (double p : rho) {
    if (p < 0.0 || !std::isfinite(p)) {
      throw std::invalid_argument("inverse depth must be finite and >= 0");
    }
    if (p > 0.0) max_depth = std::max(max_depth, 1.0 / p);
  }
  if (max_depth == 0.0) max_depth = 1.0;
  for (std::size_t i = 0; i < rho.size(); ++i) {
    d[i] = (rho[i] > 0.0 ? 1.0 / rho[i] : max_depth) / max_depth;
  }
  return d;
}

Filter2Stages filter2_stages(const FlowField& r, const Grid<double>& depth,
                             double theta_p, double depth_gate) {
  require_same_shape(r, depth, "filter2");
  const std::size_t n = r.size();
  Filter2Stages st{Grid<double>(r.width(), r.height(), 0.0),
                   Grid<double>(r.width(), r.height(), 0.0),
                   Grid<double>(r.width(), r.height(), 0.0),
                   Mask(r.width(), r.height(), 0)};
  if (n == 0) return st;

  double max_sq = 0.0;
  for (const auto& v : r) max_sq = std::max(max_sq, v.squaredNorm());
  if (max_sq == 0.0) return st;

  // 1) r' = |r|^2 / max|r|^2   2) r'' = r' tanh(d)^2
  double max_rdd = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    st.r_prime[i] = r[i].squaredNorm() / max_sq;
    const double td = std::tanh(depth[i]);
    st.r_dprime[i] = st.r_prime[i] * td * td;
    max_rdd = std::max(max_rdd, st.r_dprime[i]);
  }
  if (max_rdd == 0.0) return st;

  // 3) r'' /= max r''   4) r_s = r'' / (1 + (max r'' - r'')^2)
  for (double& v : st.r_dprime) v /= max_rdd;
  double max_after = 0.0;
  for (double v : st.r_dprime) max_after = std::max(max_after, v);
  double mean_rs = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double gap = max_after - st.r_dprime[i];
    st.r_s[i] = st.r_dprime[i] / (1.0 + gap * gap);
    mean_rs += st.r_s[i];
  }
  mean_rs /= static_cast<double>(n);
  const double threshold = theta_p * mean_rs;
  for (std::size_t i = 0; i < n; ++i) {
    st.mask[i] = (st.r_s[i] > threshold && depth[i] < depth_gate) ? 1 : 0;
  }
  return st;
}

Mask filter2(const FlowField& r, const Grid<double>& depth, double theta_p,
             double depth_gate) {
  return filter2_stages(r, depth, theta_p, depth_gate).mask;
}

ObjectResult extract_object_motion(const FlowField& flow, const FlowField& v_t,
                                   const FlowField& v_w,
                                   const InverseDepthMap& rho,
                                   const ObjMotionParams& params) {
  params.validate();
  ObjectResult out;
  out.residual = residual(flow, v_t, v_w, rho);
  const Mask f1 = filter1(out.residual, params.theta_d);
  const Mask f2 = filter2(out.residual, normalized_depth(rho), params.theta_p,
                          params.depth_gate);
  out.mask = Mask(flow.width(), flow.height(), 0);
  out.velocity = FlowField(flow.width(), flow.height(), Eigen::Vector2d::Zero());
  for (std::size_t i = 0; i < flow.size(); ++i) {
    out.mask[i] = (f1[i] && f2[i]) ? 1 : 0;
    if (out.mask[i]) out.velocity[i] = out.residual[i];
  }
  return out;
}

}  // namespace mfgvo
