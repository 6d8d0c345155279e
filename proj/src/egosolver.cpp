#include "mfgvo/egosolver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Cholesky>
#include <Eigen/SVD>

namespace mfgvo {

namespace {

constexpr double kFoeCutoff = 1e-12;

template <typename RowJacobian>
Eigen::Vector3d solve_stacked(const FlowField& field, const CameraModel& cam,
                              RowJacobian&& jacobian, const char* what) {
  if (!field.same_shape(cam.width, cam.height)) {
    throw DimensionError(std::string(what) + ": field does not match camera");
  }
  Eigen::Matrix3d normal = Eigen::Matrix3d::Zero();
  Eigen::Vector3d rhs = Eigen::Vector3d::Zero();
  for (int r = 0; r < cam.height; ++r) {
    for (int c = 0; c < cam.width; ++c) {
      const Matrix23 J = jacobian(cam.normalized(r, c));
      normal.noalias() += J.transpose() * J;
      rhs.noalias() += J.transpose() * field(r, c);
    }
  }
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(normal);
  const auto& sv = svd.singularValues();
  if (!(sv(2) > 1e-12 * sv(0))) {
    throw DegenerateInputError(std::string(what) +
                               ": normal matrix is rank deficient");
  }
  return normal.ldlt().solve(rhs);
}

}  // namespace

Eigen::Vector3d recover_translation(const FlowField& v_t, const CameraModel& cam) {
  return solve_stacked(v_t, cam, a_matrix, "recover_translation");
}

Eigen::Vector3d recover_rotation(const FlowField& v_w, const CameraModel& cam) {
  return solve_stacked(v_w, cam, b_matrix, "recover_rotation");
}

InverseDepthMap depth_from_flow(const FlowField& flow, const EgoMotion& ego,
                                const CameraModel& cam) {
  if (!flow.same_shape(cam.width, cam.height)) {
    throw DimensionError("depth_from_flow: field does not match camera");
  }
  if (!(ego.t.norm() > 0.0)) {
    throw std::invalid_argument("depth_from_flow: translation must be nonzero");
  }
  InverseDepthMap rho(cam.width, cam.height, 0.0);
  for (int r = 0; r < cam.height; ++r) {
    for (int c = 0; c < cam.width; ++c) {
      const Eigen::Vector2d p = cam.normalized(r, c);
      const Eigen::Vector2d at = a_matrix(p) * ego.t;
      const double denom = at.squaredNorm();
      if (denom < kFoeCutoff) continue;
      const Eigen::Vector2d derot = flow(r, c) - b_matrix(p) * ego.omega;
      rho(r, c) = std::max(0.0, at.dot(derot) / denom);
    }
  }
  return rho;
}

std::vector<Eigen::Vector3d> fibonacci_sphere(int count) {
  std::vector<Eigen::Vector3d> pts;
  pts.reserve(std::max(count, 0));
  const double golden = M_PI * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < count; ++i) {
    const double z = 1.0 - (2.0 * i + 1.0) / count;
    const double radius = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden * i;
    pts.emplace_back(radius * std::cos(phi), radius * std::sin(phi), z);
  }
  return pts;
}

double huber(double r, double delta) {
  const double a = std::abs(r);
  return a <= delta ? 0.5 * a * a : delta * (a - 0.5 * delta);
}

SubspaceObjective::SubspaceObjective(const FlowField& flow,
                                     const CameraModel& cam,
                                     double huber_delta)
    : delta_(huber_delta) {
  if (!flow.same_shape(cam.width, cam.height)) {
    throw DimensionError("robust_egomotion: field does not match camera");
  }
  pixels_.reserve(flow.size());
  for (int r = 0; r < cam.height; ++r) {
    for (int c = 0; c < cam.width; ++c) {
      const Eigen::Vector2d p = cam.normalized(r, c);
      pixels_.push_back({p, flow(r, c), b_matrix(p)});
    }
  }
}

namespace {

// Unit normal of A(p) t, or false at the focus of expansion.
inline bool unit_normal(const Eigen::Vector2d& p, const Eigen::Vector3d& t,
                        Eigen::Vector2d& n) {
  const Eigen::Vector2d at(t.x() - p.x() * t.z(), t.y() - p.y() * t.z());
  const double sq = at.squaredNorm();
  if (sq < kFoeCutoff) return false;
  n = Eigen::Vector2d(-at.y(), at.x()) / std::sqrt(sq);
  return true;
}

}  // namespace

SubspaceObjective::Fit SubspaceObjective::evaluate(const Eigen::Vector3d& t,
                                                   int irls_iters) const {
  const std::size_t n_px = pixels_.size();
  std::vector<Eigen::Vector3d> jac(n_px);
  std::vector<double> target(n_px);
  std::vector<std::uint8_t> used(n_px, 0);
  Fit fit;
  for (std::size_t i = 0; i < n_px; ++i) {
    Eigen::Vector2d n;
    if (!unit_normal(pixels_[i].p, t, n)) continue;
    used[i] = 1;
    jac[i] = pixels_[i].B.transpose() * n;
    target[i] = n.dot(pixels_[i].v);
    ++fit.used;
  }
  if (fit.used < 3) {
    fit.cost = std::numeric_limits<double>::infinity();
    return fit;
  }

  std::vector<double> weight(n_px, 1.0);
  for (int it = 0; it <= irls_iters; ++it) {
    Eigen::Matrix3d normal = Eigen::Matrix3d::Zero();
    Eigen::Vector3d rhs = Eigen::Vector3d::Zero();
    for (std::size_t i = 0; i < n_px; ++i) {
      if (!used[i]) continue;
      normal.noalias() += weight[i] * jac[i] * jac[i].transpose();
      rhs.noalias() += weight[i] * target[i] * jac[i];
    }
    const Eigen::LDLT<Eigen::Matrix3d> ldlt(normal);
    if (ldlt.info() != Eigen::Success) break;
    fit.omega = ldlt.solve(rhs);
    for (std::size_t i = 0; i < n_px; ++i) {
      if (!used[i]) continue;
      const double e = std::abs(jac[i].dot(fit.omega) - target[i]);
      weight[i] = e <= delta_ ? 1.0 : delta_ / e;
    }
  }

  fit.cost = 0.0;
  for (std::size_t i = 0; i < n_px; ++i) {
    if (used[i]) fit.cost += huber(jac[i].dot(fit.omega) - target[i], delta_);
  }
  return fit;
}

double SubspaceObjective::cost(const Eigen::Vector3d& t,
                               const Eigen::Vector3d& omega) const {
  double total = 0.0;
  for (const auto& px : pixels_) {
    Eigen::Vector2d n;
    if (!unit_normal(px.p, t, n)) continue;
    total += huber(n.dot(px.B * omega - px.v), delta_);
  }
  return total;
}

std::vector<double> SubspaceObjective::residuals(
    const Eigen::Vector3d& t, const Eigen::Vector3d& omega) const {
  std::vector<double> out(pixels_.size(),
                          std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 0; i < pixels_.size(); ++i) {
    Eigen::Vector2d n;
    if (!unit_normal(pixels_[i].p, t, n)) continue;
    out[i] = n.dot(pixels_[i].B * omega - pixels_[i].v);
  }
  return out;
}

namespace {

// Orthonormal tangent basis at unit vector t.
std::pair<Eigen::Vector3d, Eigen::Vector3d> tangent_basis(
    const Eigen::Vector3d& t) {
  Eigen::Vector3d helper = std::abs(t.x()) < 0.9 ? Eigen::Vector3d::UnitX()
                                                 : Eigen::Vector3d::UnitY();
  Eigen::Vector3d e1 = t.cross(helper).normalized();
  Eigen::Vector3d e2 = t.cross(e1).normalized();
  return {e1, e2};
}

}  // namespace

SolveReport robust_egomotion(const FlowField& flow, const CameraModel& cam,
                             const RobustSolveOptions& opts) {
  if (opts.coarse_grid <= 0 || opts.refine_iters <= 0 ||
      !(opts.huber_delta > 0.0) || !(opts.inlier_fraction_floor > 0.0)) {
    throw std::invalid_argument("robust_egomotion: options must be positive");
  }
  if (!flow.same_shape(cam.width, cam.height)) {
    throw DimensionError("robust_egomotion: field does not match camera");
  }
  if (flow.size() < 6) {
    throw DegenerateInputError("robust_egomotion: need at least 6 pixels");
  }

  SolveReport report;
  report.inlier_mask = Mask(flow.width(), flow.height(), 1);

  const bool all_zero = std::all_of(flow.begin(), flow.end(), [](const auto& v) {
    return v.x() == 0.0 && v.y() == 0.0;
  });
  if (all_zero) {
    report.ego.t = Eigen::Vector3d::UnitZ();
    report.degenerate = true;
    report.translation_ambiguous = true;
    return report;
  }

  const SubspaceObjective objective(flow, cam, opts.huber_delta);

  // Coarse search. Ties resolve to the lowest candidate index.
  const auto candidates = fibonacci_sphere(opts.coarse_grid);
  std::size_t best = 0;
  double best_cost = std::numeric_limits<double>::infinity();
  double worst_cost = 0.0;
  SubspaceObjective::Fit best_fit;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto fit = objective.evaluate(candidates[i]);
    if (std::isfinite(fit.cost)) worst_cost = std::max(worst_cost, fit.cost);
    if (fit.cost < best_cost) {
      best_cost = fit.cost;
      best = i;
      best_fit = fit;
    }
  }

  Eigen::Vector3d t = candidates[best];
  Eigen::Vector3d omega = best_fit.omega;

  if (worst_cost - best_cost <= 1e-12 * static_cast<double>(flow.size())) {
    // Every direction explains the flow equally: no usable translation
    // signal, so fit rotation to the raw field.
    report.translation_ambiguous = true;
    omega = recover_rotation(flow, cam);
    best_cost = objective.cost(t, omega);
  } else {
    // Coordinate descent in tangent-plane coordinates around the best
    // candidate, halving the step whenever no move improves the cost.
    const auto [e1, e2] = tangent_basis(t);
    const Eigen::Vector3d anchor = t;
    double a = 0.0, b = 0.0;
    double step = std::sqrt(4.0 * M_PI / opts.coarse_grid);
    for (int halving = 0; halving <= 10; ++halving) {
      for (int it = 0; it < opts.refine_iters; ++it) {
        bool moved = false;
        for (int axis = 0; axis < 2; ++axis) {
          for (double sign : {1.0, -1.0}) {
            const double na = a + (axis == 0 ? sign * step : 0.0);
            const double nb = b + (axis == 1 ? sign * step : 0.0);
            const Eigen::Vector3d cand = (anchor + na * e1 + nb * e2).normalized();
            const auto fit = objective.evaluate(cand);
            if (fit.cost < best_cost) {
              best_cost = fit.cost;
              a = na;
              b = nb;
              t = cand;
              omega = fit.omega;
              moved = true;
              break;
            }
          }
        }
        if (!moved) break;
      }
      step *= 0.5;
    }
  }

  // t and -t give the same objective; keep the sign that puts the majority
  // of points in front of the camera.
  const auto res = objective.residuals(t, omega);
  std::vector<double> abs_res;
  abs_res.reserve(res.size());
  for (double e : res) {
    if (!std::isnan(e)) abs_res.push_back(std::abs(e));
  }
  std::size_t floor_count = static_cast<std::size_t>(
      std::ceil(opts.inlier_fraction_floor * static_cast<double>(abs_res.size())));
  floor_count = std::min(floor_count, abs_res.size());
  double cutoff = opts.huber_delta;
  if (floor_count > 0) {
    std::vector<double> sorted = abs_res;
    std::nth_element(sorted.begin(), sorted.begin() + (floor_count - 1),
                     sorted.end());
    cutoff = std::max(cutoff, sorted[floor_count - 1]);
  }

  double sq_sum = 0.0;
  int inliers = 0;
  double front = 0.0;
  for (int r = 0; r < cam.height; ++r) {
    for (int c = 0; c < cam.width; ++c) {
      const std::size_t i = flow.index(r, c);
      const bool in = !std::isnan(res[i]) && std::abs(res[i]) <= cutoff;
      report.inlier_mask[i] = in ? 1 : 0;
      if (!in) continue;
      sq_sum += res[i] * res[i];
      ++inliers;
      const Eigen::Vector2d p = cam.normalized(r, c);
      const double num =
          (a_matrix(p) * t).dot(flow[i] - b_matrix(p) * omega);
      front += (num > 0.0) - (num < 0.0);
    }
  }
  if (front < 0.0) t = -t;

  report.ego.t = t;
  report.ego.omega = omega;
  report.objective = best_cost;
  report.residual_rms = inliers > 0 ? std::sqrt(sq_sum / inliers) : 0.0;
  return report;
}

}  // namespace mfgvo
