#include "mfgvo/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace mfgvo {

namespace {

enum Purpose : std::uint64_t {
  kMotion = 1,
  kLayout = 2,
  kObjects = 3,
  kNoise = 4,
  kOutliers = 5,
};

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

class Stream {
 public:
  explicit Stream(std::uint64_t key) : rng_(key) {}

  double uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  int integer(int lo, int hi) {  // inclusive
    const int span = hi - lo + 1;
    return lo + std::min(span - 1, static_cast<int>(uniform() * span));
  }
  // Box-Muller; the spare deviate is discarded to keep draws stateless.
  double normal(double sigma) {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return sigma * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

 private:
  std::mt19937_64 rng_;
};

struct Rect {
  int r0, c0, r1, c1;  // half-open
};

Rect random_rect(Stream& s, int width, int height, double max_w_frac,
                 double max_h_frac) {
  const int w = std::max(1, static_cast<int>(std::floor(s.uniform(0.1, max_w_frac) * width)));
  const int h = std::max(1, static_cast<int>(std::floor(s.uniform(0.15, max_h_frac) * height)));
  const int r0 = s.integer(0, height - h);
  const int c0 = s.integer(0, width - w);
  return {r0, c0, r0 + h, c0 + w};
}

}  // namespace

void SceneConfig::validate() const {
  if (width < 8 || height < 8) throw std::invalid_argument("scene must be at least 8x8");
  if (!(focal > 0.0)) throw std::invalid_argument("scene focal must be positive");
  if (!(min_depth > 0.0 && max_depth >= min_depth)) {
    throw std::invalid_argument("scene depth range must be positive and nonempty");
  }
  if (!(object_min_depth >= min_depth && object_max_depth <= max_depth &&
        object_max_depth >= object_min_depth)) {
    throw std::invalid_argument("object depth range must lie inside the scene range");
  }
  if (max_boxes < 0 || min_objects < 0 || max_objects < min_objects || max_objects > 3) {
    throw std::invalid_argument("box/object counts out of range");
  }
  if (max_translation < 0.0 || max_rotation < 0.0 || max_object_speed < 0.0 ||
      noise_sigma < 0.0 || outlier_magnitude < 0.0 || camera_height <= 0.0) {
    throw std::invalid_argument("scene magnitudes must be non-negative");
  }
  if (!(outlier_fraction >= 0.0 && outlier_fraction <= 1.0)) {
    throw std::invalid_argument("outlier fraction must lie in [0, 1]");
  }
  if (!(smoothing >= 0.0 && smoothing < 1.0)) {
    throw std::invalid_argument("smoothing must lie in [0, 1)");
  }
}

std::uint64_t stream_key(std::uint64_t seed, std::uint64_t index,
                         std::uint64_t purpose) {
  return splitmix64(splitmix64(splitmix64(seed) ^ index) ^ purpose);
}

EgoMotion sample_egomotion(const SceneConfig& config, std::uint64_t index) {
  Stream s(stream_key(config.seed, index, kMotion));
  EgoMotion m;
  // Mostly forward, a little lateral and vertical drift.
  const Eigen::Vector3d dir =
      Eigen::Vector3d(s.normal(0.15), s.normal(0.05), 1.0).normalized();
  m.t = s.uniform(0.0, config.max_translation) * dir;
  // Yaw dominates; pitch and roll stay small.
  Eigen::Vector3d w(s.normal(0.1 * config.max_rotation),
                    s.uniform(-0.9, 0.9) * config.max_rotation,
                    s.normal(0.1 * config.max_rotation));
  if (w.norm() > config.max_rotation) {
    w *= config.max_rotation / w.norm();
  }
  m.omega = w;
  return m;
}

SceneSample render_scene(const SceneConfig& config, const EgoMotion& motion,
                         std::uint64_t index) {
  config.validate();
  const CameraModel cam = config.camera();
  const int W = config.width, H = config.height;

  // Depth: ground plane below the horizon, far wall above, boxes on top.
  Grid<double> depth(W, H, config.max_depth);
  for (int r = 0; r < H; ++r) {
    const double y = cam.normalized(r, 0).y();
    const double z = y > 0.0 ? config.camera_height / y : config.max_depth;
    for (int c = 0; c < W; ++c) {
      depth(r, c) = std::clamp(z, config.min_depth, config.max_depth);
    }
  }
  Stream layout(stream_key(config.seed, index, kLayout));
  const int boxes = layout.integer(0, config.max_boxes);
  for (int b = 0; b < boxes; ++b) {
    const Rect rect = random_rect(layout, W, H, 0.35, 0.6);
    const double z = layout.uniform(config.min_depth, config.max_depth);
    for (int r = rect.r0; r < rect.r1; ++r) {
      for (int c = rect.c0; c < rect.c1; ++c) depth(r, c) = std::min(depth(r, c), z);
    }
  }

  // Moving objects: each at most 0.28 x 0.29 of the frame, so three of them
  // cover under a quarter of it.
  SceneSample out;
  out.gt = motion;
  out.object_mask = Mask(W, H, 0);
  out.object_flow = FlowField(W, H);
  Stream objects(stream_key(config.seed, index, kObjects));
  const int n_obj = objects.integer(config.min_objects, config.max_objects);
  for (int k = 0; k < n_obj; ++k) {
    const Rect rect = random_rect(objects, W, H, 0.28, 0.29);
    const double z = objects.uniform(config.object_min_depth, config.object_max_depth);
    const double speed = objects.uniform(0.0, config.max_object_speed);
    const double heading = objects.uniform(0.0, 2.0 * M_PI);
    const Eigen::Vector2d flow =
        (speed / z) * Eigen::Vector2d(std::cos(heading), std::sin(heading));
    for (int r = rect.r0; r < rect.r1; ++r) {
      for (int c = rect.c0; c < rect.c1; ++c) {
        if (z <= depth(r, c)) {
          depth(r, c) = z;
          out.object_mask(r, c) = 1;
          out.object_flow(r, c) = flow;
        }
      }
    }
  }
  out.rho = InverseDepthMap(W, H, 0.0);
  for (std::size_t i = 0; i < depth.size(); ++i) out.rho[i] = 1.0 / depth[i];

  out.flow = motion_field(motion, out.rho, cam);
  for (std::size_t i = 0; i < out.flow.size(); ++i) out.flow[i] += out.object_flow[i];

  if (config.noise_sigma > 0.0) {
    Stream noise(stream_key(config.seed, index, kNoise));
    for (auto& v : out.flow) {
      v.x() += noise.normal(config.noise_sigma);
      v.y() += noise.normal(config.noise_sigma);
    }
  }
  if (config.outlier_fraction > 0.0) {
    Stream outliers(stream_key(config.seed, index, kOutliers));
    const double a = config.outlier_magnitude;
    for (auto& v : out.flow) {
      if (outliers.uniform() < config.outlier_fraction) {
        v = {outliers.uniform(-a, a), outliers.uniform(-a, a)};
      }
    }
  }
  return out;
}

std::vector<SceneSample> generate(const SceneConfig& config, int count) {
  if (count < 1) throw std::invalid_argument("generate: count must be >= 1");
  config.validate();
  std::vector<SceneSample> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    out.push_back(render_scene(config, sample_egomotion(config, i), i));
  }
  return out;
}

SceneSequence generate_sequence(const SceneConfig& config, int length) {
  if (length < 2) throw std::invalid_argument("generate_sequence: length must be >= 2");
  config.validate();
  SceneSequence seq;
  std::vector<EgoMotion> motions;
  EgoMotion current = sample_egomotion(config, 0);
  const double a = config.smoothing;
  for (int k = 0; k < length - 1; ++k) {
    if (k > 0) {
      const EgoMotion raw = sample_egomotion(config, k);
      current.t = a * current.t + (1.0 - a) * raw.t;
      current.omega = a * current.omega + (1.0 - a) * raw.omega;
    }
    motions.push_back(current);
    seq.samples.push_back(render_scene(config, current, k));
  }
  seq.trajectory = integrate_trajectory(motions);
  return seq;
}

}  // namespace mfgvo
