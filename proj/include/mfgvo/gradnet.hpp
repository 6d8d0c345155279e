#pragma once

// Small reverse-mode differentiation engine: just enough tensor operations
// to build and train a convolutional encoder with a linear decoder.
//
// Every operation records a node pointing at its inputs; calling backward()
// on a scalar result walks that graph in reverse topological order and adds
// the gradient of the result into every leaf tensor that requires it. Values
// are 64-bit throughout.

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mfgvo/grid.hpp"

namespace mfgvo::gradnet {

using Shape = std::vector<int>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

class Tensor {
 public:
  Tensor();

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values,
                     bool requires_grad = false);
  static Tensor scalar(double value);

  const Shape& shape() const;
  std::size_t numel() const;
  int dim(std::size_t axis) const { return shape().at(axis); }

  std::span<const double> values() const;
  /// Writable view for parameter updates and initialization.
  std::span<double> mutable_values();
  double item() const;

  bool requires_grad() const;
  /// Accumulated gradient (leaves only); zeros until backward runs.
  std::span<const double> grad() const;
  void zero_grad();

  /// Adds d(this)/d(leaf) into every reachable leaf's gradient. `this` must
  /// hold exactly one value.
  void backward() const;

  /// Same values, no history, no gradient.
  Tensor detach() const;

  struct Node;
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}
  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

struct Conv2dGeometry {
  std::array<int, 2> stride{1, 1};   // vertical, horizontal
  std::array<int, 2> padding{0, 0};  // vertical, horizontal (zero padding)
};

/// Output extent along one axis: floor((in + 2 pad - k) / stride) + 1.
int conv_output_extent(int in, int kernel, int stride, int pad);

/// Cross-correlation of input [N, C, H, W] with kernel [O, C, KH, KW] plus an
/// optional per-channel bias [O]. Pass an empty Tensor for no bias.
Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias,
              const Conv2dGeometry& geom);
Tensor conv2d(const Tensor& input, const Tensor& kernel,
              const Conv2dGeometry& geom);

/// y = W x + b for x [n], W [m, n], b [m] (or empty).
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);
Tensor linear(const Tensor& x, const Tensor& weight);

Tensor relu(const Tensor& x);
/// 1 / (1 + q exp(-steepness x)) elementwise.
Tensor generalized_logistic(const Tensor& x, double q = 25.0,
                            double steepness = 10.0);
Tensor tanh(const Tensor& x);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor reshape(const Tensor& a, Shape shape);

Tensor sum(const Tensor& a);
/// Largest entry; the gradient goes to the first index attaining it.
Tensor max(const Tensor& a);
/// sum |a - b|; the subgradient at a == b is 0.
Tensor l1_distance(const Tensor& a, const Tensor& b);

Tensor operator+(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a, const Tensor& b);
Tensor operator*(const Tensor& a, const Tensor& b);
Tensor operator*(double c, const Tensor& a);

/// Uniform in +-sqrt(6 / (fan_in + fan_out)).
void glorot_uniform(Tensor& t, int fan_in, int fan_out, std::mt19937_64& rng);

/// Uniform double in [0, 1) from the top 53 bits of one draw.
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

struct AdamConfig {
  double learning_rate = 1e-5;
  double beta1 = 0.99;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::int64_t step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> s;
};

/// One bias-corrected Adam update of `params` from their accumulated
/// gradients. Moment buffers are created on the first call.
void adam_step(std::span<Tensor> params, AdamState& state);

/// Checkpoint container: "MFG1", u32 entry count, then per entry a u32-length
/// name, u32 rank, u32 extents and little-endian IEEE-754 binary64 values.
struct NamedTensor {
  std::string name;
  Shape shape;
  std::vector<double> values;
};

void write_checkpoint(std::ostream& out, const std::vector<NamedTensor>& entries);
std::vector<NamedTensor> read_checkpoint(std::istream& in);
void save_checkpoint(const std::string& path,
                     const std::vector<NamedTensor>& entries);
std::vector<NamedTensor> load_checkpoint(const std::string& path);

}  // namespace mfgvo::gradnet
