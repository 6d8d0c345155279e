#pragma once

#include <iosfwd>
#include <optional>
#include <utility>
#include <vector>

#include "mfgvo/geometry.hpp"
#include "mfgvo/mfg.hpp"

namespace mfgvo {

struct MetricReport {
  double mean = 0.0;
  /// Population standard deviation of `values`.
  double std = 0.0;
  std::vector<double> values;

  static MetricReport from_values(std::vector<double> values);
};

struct AteOptions {
  int snippet_length = 5;
};

/// Absolute trajectory error over every overlapping snippet. Each snippet is
/// re-anchored so its first position is the origin, the predicted positions
/// get the single non-negative scale that best matches GT, and the RMSE of
/// the remaining position differences is that snippet's value.
MetricReport ate(const Trajectory& pred, const Trajectory& gt,
                 const AteOptions& opts = {});

/// ATE of one already-anchored snippet (exposed for checking).
double snippet_ate(const std::vector<Eigen::Vector3d>& pred,
                   const std::vector<Eigen::Vector3d>& gt);

struct RpeReport {
  MetricReport translation;  // |t_pred - t_gt|, scene units per frame
  MetricReport rotation;     // angle of exp(w_pred) exp(w_gt)^T, radians
};

RpeReport rpe(const std::vector<EgoMotion>& pred,
              const std::vector<EgoMotion>& gt);

/// Angle between two translation directions in radians; pi/2 when either
/// vector is zero.
double direction_error(const Eigen::Vector3d& a, const Eigen::Vector3d& b);

enum class SweepMetric {
  /// Mean absolute error per field entry of the predicted translational and
  /// rotational fields against the GT fields.
  kFieldError,
  /// Mean ATE over snippets; the frames must form one consecutive sequence.
  kAte,
};

struct SweepRow {
  double k = 100.0;
  double value = 0.0;
};

/// Evaluates the model with the hidden layer restricted to its top k percent
/// for each k. Rows come back sorted by k, descending.
std::vector<SweepRow> sparsity_sweep(const MfgModel& model,
                                     const std::vector<TrainSample>& frames,
                                     std::vector<double> ks,
                                     SweepMetric metric = SweepMetric::kFieldError,
                                     const AteOptions& ate_opts = {});

/// Mean field error of the model (no masking) over `frames`.
double field_error(const MfgModel& model, const std::vector<TrainSample>& frames,
                   std::optional<double> k_percent = std::nullopt);

void write_ate_csv(std::ostream& out, const MetricReport& report);
void write_rpe_csv(std::ostream& out, const RpeReport& report);
void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows,
                     const char* metric_name);

}  // namespace mfgvo
