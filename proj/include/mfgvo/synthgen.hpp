#pragma once

// Deterministic synthetic dynamic scenes: a ground plane with fronto-parallel
// boxes, a few independently moving objects, and camera egomotion biased
// toward forward driving with yaw.

#include <cstdint>
#include <vector>

#include "mfgvo/geometry.hpp"

namespace mfgvo {

struct SceneConfig {
  int width = 48;
  int height = 16;
  double focal = 28.0;

  double camera_height = 1.5;
  double min_depth = 4.0;
  double max_depth = 50.0;
  int max_boxes = 5;

  double max_translation = 1.5;  // |t| per frame, scene units
  double max_rotation = 0.05;    // |omega| per frame, rad

  int min_objects = 0;
  int max_objects = 3;
  double max_object_speed = 1.0;  // lateral scene units per frame
  double object_min_depth = 4.0;
  double object_max_depth = 10.0;

  double noise_sigma = 0.0;       // per-component Gaussian, normalized units
  double outlier_fraction = 0.0;
  double outlier_magnitude = 0.5; // outliers uniform in +-this, normalized units

  /// First-order low-pass factor for sequences (weight of the previous motion).
  double smoothing = 0.7;

  std::uint64_t seed = 0;

  CameraModel camera() const { return CameraModel::centered(focal, width, height); }
  void validate() const;
};

/// One frame pair. `flow` = motion_field(gt, rho) + object_flow + noise.
struct SceneSample {
  FlowField flow;
  EgoMotion gt;
  InverseDepthMap rho;
  Mask object_mask;
  FlowField object_flow;
};

/// Counter-based stream key: every (seed, index, purpose) triple gets an
/// independent generator state.
std::uint64_t stream_key(std::uint64_t seed, std::uint64_t index, std::uint64_t purpose);

/// Random egomotion draw with the configured forward/yaw bias.
EgoMotion sample_egomotion(const SceneConfig& config, std::uint64_t index);

/// Scene for a given motion. Sample `index` keys every random choice.
SceneSample render_scene(const SceneConfig& config, const EgoMotion& motion,
                         std::uint64_t index);

std::vector<SceneSample> generate(const SceneConfig& config, int count);

struct SceneSequence {
  std::vector<SceneSample> samples;  // samples[k] moves pose k to pose k+1
  Trajectory trajectory;
};

/// `length` poses joined by low-pass filtered motions.
SceneSequence generate_sequence(const SceneConfig& config, int length);

}  // namespace mfgvo
