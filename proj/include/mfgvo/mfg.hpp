#pragma once

// Motion Field Generator: a convolutional encoder that maps an optic-flow
// field to M non-negative hidden activations, followed by two bias-free
// linear decoders whose columns are translational and rotational basis
// motion fields.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "mfgvo/geometry.hpp"
#include "mfgvo/gradnet.hpp"

namespace mfgvo {

struct EncoderLayer {
  int out_channels = 1;
  std::array<int, 2> kernel{1, 1};   // vertical, horizontal
  std::array<int, 2> stride{1, 1};
  std::array<int, 2> padding{0, 0};
};

struct MfgConfig {
  int width = 48;
  int height = 16;
  double focal = 28.0;
  int hidden = 128;
  std::vector<EncoderLayer> encoder;
  double sparsity_weight = 100.0;
  /// Normalized input flow is divided by this before entering the encoder.
  double input_scale = 0.1;
  gradnet::AdamConfig adam{1e-4, 0.99, 0.999, 1e-8};

  /// Four conv+relu blocks with channels 16, 32, 64, hidden; the last one
  /// covers the remaining spatial extent so its output is 1x1.
  static MfgConfig desk_default();
  /// Same layout for an arbitrary input size and hidden width.
  static MfgConfig make(int width, int height, int hidden);

  CameraModel camera() const { return CameraModel::centered(focal, width, height); }
  /// Throws std::invalid_argument when the encoder does not end in
  /// exactly `hidden` scalars.
  void validate() const;
};

/// Learning rate for long runs; the desk default above trains for far fewer steps.
inline constexpr double kLongRunLearningRate = 1e-5;

/// One training example: input flow (normalized units) and its GT motion.
struct TrainSample {
  FlowField flow;
  EgoMotion gt;
};

struct MfgOutput {
  FlowField v_t;
  FlowField v_w;
  std::vector<double> hidden;
};

class MfgModel {
 public:
  MfgModel(MfgConfig config, std::uint64_t seed);

  const MfgConfig& config() const { return config_; }
  CameraModel camera() const { return config_.camera(); }

  /// Inference pass.
  MfgOutput forward(const FlowField& flow) const;
  /// Decoder only: predictions for an arbitrary hidden vector.
  MfgOutput decode(std::span<const double> hidden) const;

  struct Graph {
    gradnet::Tensor v_t;     // [2 * W * H], (u, v) interleaved, row-major
    gradnet::Tensor v_w;
    gradnet::Tensor hidden;  // [M]
  };
  Graph forward_graph(const FlowField& flow) const;

  /// Encoder kernels and biases followed by D_t and D_w.
  std::vector<gradnet::Tensor>& parameters() { return params_; }
  const std::vector<gradnet::Tensor>& parameters() const { return params_; }
  const gradnet::Tensor& decoder_t() const { return params_[params_.size() - 2]; }
  const gradnet::Tensor& decoder_w() const { return params_.back(); }

  std::vector<gradnet::NamedTensor> to_checkpoint() const;
  static MfgModel from_checkpoint(const std::vector<gradnet::NamedTensor>& entries);

  /// Deep copy with independent parameter storage.
  MfgModel clone() const;

 private:
  MfgModel() = default;
  gradnet::Tensor input_tensor(const FlowField& flow) const;

  MfgConfig config_;
  std::vector<gradnet::Tensor> params_;
};

/// Flattens a field to (u, v) interleaved row-major values.
std::vector<double> flatten(const FlowField& field);
FlowField unflatten(std::span<const double> values, int width, int height);

struct PredictionLosses {
  double translation = 0.0;
  double rotation = 0.0;
};

/// Sum over pixels of the L1 distance between target and prediction.
PredictionLosses prediction_losses(const FlowField& pred_t, const FlowField& pred_w,
                                   const FlowField& target_t,
                                   const FlowField& target_w);

struct LossWeights {
  double translation = 1.0;
  double rotation = 1.0;
};

/// Balances the two prediction losses by the ratio of squared field norms,
/// never below 1. Denominators are floored at 1e-12.
LossWeights loss_weights(const FlowField& v_t, const FlowField& v_w);

double generalized_logistic(double h, double q = 25.0, double steepness = 10.0);
/// Smooth count of active hidden units: sum_i g(h_i).
double sparsity_loss(std::span<const double> hidden);

struct LossBreakdown {
  double total = 0.0;
  double translation = 0.0;
  double rotation = 0.0;
  double sparsity = 0.0;
  LossWeights weights;
  int active = 0;
};

/// w_t L_t + w_w L_w + w_s L_s for one sample, as a differentiable graph.
std::pair<gradnet::Tensor, LossBreakdown> total_loss_graph(const MfgModel& model,
                                                           const TrainSample& sample);
LossBreakdown total_loss(const MfgModel& model, const TrainSample& sample);

struct EpochStats {
  int epoch = 0;
  double translation = 0.0;
  double rotation = 0.0;
  double sparsity = 0.0;
  double active = 0.0;
};
using TrainLog = std::vector<EpochStats>;

/// Batch size 1 Adam with a seeded shuffle every epoch. Samples whose GT
/// fields are both identically zero are skipped.
TrainLog train(MfgModel& model, const std::vector<TrainSample>& dataset,
               int epochs, std::uint64_t seed);
void write_train_log(std::ostream& out, const TrainLog& log);

/// Units with activation above this count as active.
inline constexpr double kActiveThreshold = 1e-6;
int active_count(std::span<const double> hidden);

/// Keeps the ceil(k M / 100) largest activations (ties to the lower index)
/// and zeroes the rest. Requires 0 < k <= 100.
std::vector<double> topk_mask(std::span<const double> hidden, double k_percent);

/// Column m of D_t and D_w as fields.
std::pair<FlowField, FlowField> decode_basis(const MfgModel& model, int neuron);

/// forward -> optional top-k mask -> closed-form parameter recovery.
EgoMotion predict_egomotion(const MfgModel& model, const FlowField& flow,
                            std::optional<double> k_percent = std::nullopt);

}  // namespace mfgvo
