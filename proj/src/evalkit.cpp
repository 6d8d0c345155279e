#include "mfgvo/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include <Eigen/Geometry>

#include "mfgvo/egosolver.hpp"
#include "mfgvo/format.hpp"

namespace mfgvo {

MetricReport MetricReport::from_values(std::vector<double> values) {
  MetricReport r;
  r.values = std::move(values);
  if (r.values.empty()) return r;
  double s = 0.0;
  for (double v : r.values) s += v;
  r.mean = s / static_cast<double>(r.values.size());
  double sq = 0.0;
  for (double v : r.values) sq += (v - r.mean) * (v - r.mean);
  r.std = std::sqrt(sq / static_cast<double>(r.values.size()));
  return r;
}

double snippet_ate(const std::vector<Eigen::Vector3d>& pred,
                   const std::vector<Eigen::Vector3d>& gt) {
  if (pred.size() != gt.size() || pred.empty()) {
    throw std::invalid_argument("snippet_ate: snippets must be equal and nonempty");
  }
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    num += pred[i].dot(gt[i]);
    den += pred[i].squaredNorm();
  }
  const double s = den > 0.0 ? std::max(0.0, num / den) : 0.0;
  double sq = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) sq += (s * pred[i] - gt[i]).squaredNorm();
  return std::sqrt(sq / static_cast<double>(pred.size()));
}

MetricReport ate(const Trajectory& pred, const Trajectory& gt,
                 const AteOptions& opts) {
  if (opts.snippet_length < 2) {
    throw std::invalid_argument("ate: snippet length must be >= 2");
  }
  if (pred.size() != gt.size()) {
    throw std::invalid_argument("ate: trajectories differ in length (" +
                                std::to_string(pred.size()) + " vs " +
                                std::to_string(gt.size()) + ")");
  }
  const auto L = static_cast<std::size_t>(opts.snippet_length);
  if (pred.size() < L) {
    throw std::invalid_argument("ate: trajectory shorter than one snippet");
  }
  std::vector<double> values;
  for (std::size_t start = 0; start + L <= pred.size(); ++start) {
    std::vector<Eigen::Vector3d> p(L), g(L);
    for (std::size_t i = 0; i < L; ++i) {
      p[i] = pred[start + i].translation - pred[start].translation;
      g[i] = gt[start + i].translation - gt[start].translation;
    }
    values.push_back(snippet_ate(p, g));
  }
  return MetricReport::from_values(std::move(values));
}

RpeReport rpe(const std::vector<EgoMotion>& pred,
              const std::vector<EgoMotion>& gt) {
  if (pred.size() != gt.size()) {
    throw std::invalid_argument("rpe: sequences differ in length");
  }
  std::vector<double> trans, rot;
  trans.reserve(pred.size());
  rot.reserve(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    trans.push_back((pred[i].t - gt[i].t).norm());
    const Eigen::Matrix3d rel = so3_exp(pred[i].omega) * so3_exp(gt[i].omega).transpose();
    rot.push_back(so3_log(rel).norm());
  }
  return {MetricReport::from_values(std::move(trans)),
          MetricReport::from_values(std::move(rot))};
}

double direction_error(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  const double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) return M_PI / 2.0;
  // atan2 form stays accurate for nearly parallel vectors.
  return std::atan2(a.cross(b).norm(), a.dot(b));
}

double field_error(const MfgModel& model, const std::vector<TrainSample>& frames,
                   std::optional<double> k_percent) {
  if (frames.empty()) throw std::invalid_argument("field_error: no frames");
  const CameraModel cam = model.camera();
  double total = 0.0;
  for (const auto& f : frames) {
    MfgOutput out = model.forward(f.flow);
    if (k_percent) out = model.decode(topk_mask(out.hidden, *k_percent));
    const auto losses =
        prediction_losses(out.v_t, out.v_w, translational_field(f.gt.t, cam),
                          rotational_field(f.gt.omega, cam));
    total += (losses.translation + losses.rotation) /
             (4.0 * static_cast<double>(cam.pixel_count()));
  }
  return total / static_cast<double>(frames.size());
}

std::vector<SweepRow> sparsity_sweep(const MfgModel& model,
                                     const std::vector<TrainSample>& frames,
                                     std::vector<double> ks, SweepMetric metric,
                                     const AteOptions& ate_opts) {
  std::sort(ks.begin(), ks.end(), std::greater<>());
  std::vector<SweepRow> rows;
  std::vector<EgoMotion> gt_motions;
  for (const auto& f : frames) gt_motions.push_back(f.gt);
  for (double k : ks) {
    SweepRow row{k, 0.0};
    if (metric == SweepMetric::kFieldError) {
      row.value = field_error(model, frames, k);
    } else {
      std::vector<EgoMotion> pred;
      for (const auto& f : frames) pred.push_back(predict_egomotion(model, f.flow, k));
      row.value = ate(integrate_trajectory(pred), integrate_trajectory(gt_motions),
                      ate_opts).mean;
    }
    rows.push_back(row);
  }
  return rows;
}

void write_ate_csv(std::ostream& out, const MetricReport& report) {
  out << "snippet_index,ate\n";
  for (std::size_t i = 0; i < report.values.size(); ++i) {
    out << i << ',' << fmt9(report.values[i]) << '\n';
  }
}

void write_rpe_csv(std::ostream& out, const RpeReport& report) {
  out << "frame_index,translation_error,rotation_error\n";
  for (std::size_t i = 0; i < report.translation.values.size(); ++i) {
    out << i << ',' << fmt9(report.translation.values[i]) << ','
        << fmt9(report.rotation.values[i]) << '\n';
  }
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows,
                     const char* metric_name) {
  out << "k," << metric_name << '\n';
  for (const auto& r : rows) out << fmt9(r.k) << ',' << fmt9(r.value) << '\n';
}

}  // namespace mfgvo
