#include "mfgvo/gradnet.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace mfgvo::gradnet {

using GradBuffers = std::vector<std::vector<double>*>;
// Receives the output gradient and one buffer per parent (null when that
// parent does not need a gradient). Buffers must be accumulated into.
using BackwardFn =
    std::function<void(const std::vector<double>& out_grad, GradBuffers& in)>;

struct Tensor::Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;       // accumulated, leaves only
  std::vector<double> pass_grad;  // scratch during one backward pass
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  BackwardFn backward;
};

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (int e : shape) {
    if (e < 0) throw DimensionError("negative tensor extent");
    n *= static_cast<std::size_t>(e);
  }
  return n;
}

std::string to_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor::Tensor() : node_(std::make_shared<Node>()) {}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  auto node = std::make_shared<Node>();
  node->value.assign(gradnet::numel(shape), 0.0);
  node->shape = std::move(shape);
  node->requires_grad = requires_grad;
  if (requires_grad) node->grad.assign(node->value.size(), 0.0);
  return Tensor(std::move(node));
}

Tensor Tensor::from(Shape shape, std::vector<double> values,
                    bool requires_grad) {
  if (gradnet::numel(shape) != values.size()) {
    throw DimensionError("tensor value count " + std::to_string(values.size()) +
                         " does not match shape " + to_string(shape));
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  if (requires_grad) node->grad.assign(node->value.size(), 0.0);
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value) { return from({1}, {value}); }

const Shape& Tensor::shape() const { return node_->shape; }
std::size_t Tensor::numel() const { return node_->value.size(); }
std::span<const double> Tensor::values() const { return node_->value; }
std::span<double> Tensor::mutable_values() { return node_->value; }
bool Tensor::requires_grad() const { return node_->requires_grad; }
std::span<const double> Tensor::grad() const { return node_->grad; }

double Tensor::item() const {
  if (numel() != 1) throw DimensionError("item() on a non-scalar tensor");
  return node_->value[0];
}

void Tensor::zero_grad() {
  std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::detach() const { return from(shape(), node_->value); }

void Tensor::backward() const {
  if (numel() != 1) throw DimensionError("backward() needs a scalar output");
  if (!node_->requires_grad) return;

  // Iterative post-order DFS gives a topological order (parents first).
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{node_.get(), 0}};
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && seen.insert(parent).second) {
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (Node* n : order) n->pass_grad.assign(n->value.size(), 0.0);
  node_->pass_grad[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (!n->backward) continue;
    GradBuffers in;
    in.reserve(n->parents.size());
    for (const auto& p : n->parents) {
      in.push_back(p->requires_grad ? &p->pass_grad : nullptr);
    }
    n->backward(n->pass_grad, in);
  }
  // Leaves receive this pass's total in one addition, so repeated passes
  // accumulate exact multiples.
  for (Node* n : order) {
    if (!n->backward) {
      for (std::size_t i = 0; i < n->grad.size(); ++i) n->grad[i] += n->pass_grad[i];
    }
    std::vector<double>().swap(n->pass_grad);
  }
}

namespace {

Tensor make_result(Shape shape, std::vector<double> value,
                   std::vector<Tensor> inputs, BackwardFn backward) {
  auto node = std::make_shared<Tensor::Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  for (const auto& t : inputs) {
    node->requires_grad = node->requires_grad || t.requires_grad();
    node->parents.push_back(t.node());
  }
  if (node->requires_grad) node->backward = std::move(backward);
  return Tensor(std::move(node));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " +
                         to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
}

template <typename F>
Tensor unary(const Tensor& a, F&& fwd_and_deriv) {
  const auto in = a.values();
  std::vector<double> out(in.size());
  std::vector<double> deriv(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) {
    auto [y, d] = fwd_and_deriv(in[i]);
    out[i] = y;
    deriv[i] = d;
  }
  return make_result(a.shape(), std::move(out), {a},
                     [deriv = std::move(deriv)](const std::vector<double>& g,
                                                GradBuffers& bufs) {
                       auto& ga = *bufs[0];
                       for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * deriv[i];
                     });
}

}  // namespace

int conv_output_extent(int in, int kernel, int stride, int pad) {
  if (stride < 1 || kernel < 1 || pad < 0) {
    throw DimensionError("conv2d: kernel and stride must be >= 1, padding >= 0");
  }
  const int span = in + 2 * pad - kernel;
  if (span < 0) throw DimensionError("conv2d: kernel larger than padded input");
  return span / stride + 1;
}

Tensor conv2d(const Tensor& input, const Tensor& kernel,
              const Conv2dGeometry& geom) {
  return conv2d(input, kernel, Tensor(), geom);
}

Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias,
              const Conv2dGeometry& geom) {
  if (input.shape().size() != 4 || kernel.shape().size() != 4) {
    throw DimensionError("conv2d: input and kernel must be 4-D");
  }
  const int N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
  const int O = kernel.dim(0), KH = kernel.dim(2), KW = kernel.dim(3);
  if (kernel.dim(1) != C) {
    throw DimensionError("conv2d: kernel channels " + std::to_string(kernel.dim(1)) +
                         " != input channels " + std::to_string(C));
  }
  const bool has_bias = bias.numel() > 0;
  if (has_bias && (bias.shape().size() != 1 || bias.dim(0) != O)) {
    throw DimensionError("conv2d: bias must have shape [out_channels]");
  }
  const int SH = geom.stride[0], SW = geom.stride[1];
  const int PH = geom.padding[0], PW = geom.padding[1];
  const int OH = conv_output_extent(H, KH, SH, PH);
  const int OW = conv_output_extent(W, KW, SW, PW);

  const auto x = input.values();
  const auto k = kernel.values();
  std::vector<double> out(static_cast<std::size_t>(N) * O * OH * OW, 0.0);

  auto x_at = [=](int n, int c, int h, int w) {
    return ((static_cast<std::size_t>(n) * C + c) * H + h) * W + w;
  };
  auto k_at = [=](int o, int c, int i, int j) {
    return ((static_cast<std::size_t>(o) * C + c) * KH + i) * KW + j;
  };
  auto y_at = [=](int n, int o, int i, int j) {
    return ((static_cast<std::size_t>(n) * O + o) * OH + i) * OW + j;
  };

  for (int n = 0; n < N; ++n) {
    for (int o = 0; o < O; ++o) {
      const double b0 = has_bias ? bias.values()[o] : 0.0;
      for (int oh = 0; oh < OH; ++oh) {
        for (int ow = 0; ow < OW; ++ow) {
          double acc = b0;
          for (int c = 0; c < C; ++c) {
            for (int i = 0; i < KH; ++i) {
              const int h = oh * SH - PH + i;
              if (h < 0 || h >= H) continue;
              const double* xrow = &x[x_at(n, c, h, 0)];
              const double* krow = &k[k_at(o, c, i, 0)];
              for (int j = 0; j < KW; ++j) {
                const int w = ow * SW - PW + j;
                if (w < 0 || w >= W) continue;
                acc += xrow[w] * krow[j];
              }
            }
          }
          out[y_at(n, o, oh, ow)] = acc;
        }
      }
    }
  }

  std::vector<Tensor> inputs{input, kernel};
  if (has_bias) inputs.push_back(bias);
  auto backward = [=, xv = input.node(), kv = kernel.node()](
                      const std::vector<double>& g, GradBuffers& bufs) {
    const auto& xs = xv->value;
    const auto& ks = kv->value;
    std::vector<double>* gx = bufs[0];
    std::vector<double>* gk = bufs[1];
    std::vector<double>* gb = has_bias ? bufs[2] : nullptr;
    for (int n = 0; n < N; ++n) {
      for (int o = 0; o < O; ++o) {
        for (int oh = 0; oh < OH; ++oh) {
          for (int ow = 0; ow < OW; ++ow) {
            const double go = g[y_at(n, o, oh, ow)];
            if (go == 0.0) continue;
            if (gb) (*gb)[o] += go;
            for (int c = 0; c < C; ++c) {
              for (int i = 0; i < KH; ++i) {
                const int h = oh * SH - PH + i;
                if (h < 0 || h >= H) continue;
                const std::size_t xbase = x_at(n, c, h, 0);
                const std::size_t kbase = k_at(o, c, i, 0);
                for (int j = 0; j < KW; ++j) {
                  const int w = ow * SW - PW + j;
                  if (w < 0 || w >= W) continue;
                  if (gx) (*gx)[xbase + w] += go * ks[kbase + j];
                  if (gk) (*gk)[kbase + j] += go * xs[xbase + w];
                }
              }
            }
          }
        }
      }
    }
  };
  return make_result({N, O, OH, OW}, std::move(out), std::move(inputs),
                     std::move(backward));
}

Tensor linear(const Tensor& x, const Tensor& weight) {
  return linear(x, weight, Tensor());
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  if (weight.shape().size() != 2) throw DimensionError("linear: weight must be 2-D");
  const int m = weight.dim(0), n = weight.dim(1);
  if (x.numel() != static_cast<std::size_t>(n)) {
    throw DimensionError("linear: input has " + std::to_string(x.numel()) +
                         " values, weight expects " + std::to_string(n));
  }
  const bool has_bias = bias.numel() > 0;
  if (has_bias && bias.numel() != static_cast<std::size_t>(m)) {
    throw DimensionError("linear: bias must have shape [out]");
  }
  const auto xs = x.values();
  const auto ws = weight.values();
  std::vector<double> out(m);
  for (int r = 0; r < m; ++r) {
    const double* row = &ws[static_cast<std::size_t>(r) * n];
    double acc = has_bias ? bias.values()[r] : 0.0;
    for (int c = 0; c < n; ++c) acc += row[c] * xs[c];
    out[r] = acc;
  }
  std::vector<Tensor> inputs{x, weight};
  if (has_bias) inputs.push_back(bias);
  auto backward = [m, n, has_bias, xv = x.node(), wv = weight.node()](
                      const std::vector<double>& g, GradBuffers& bufs) {
    std::vector<double>* gx = bufs[0];
    std::vector<double>* gw = bufs[1];
    std::vector<double>* gb = has_bias ? bufs[2] : nullptr;
    for (int r = 0; r < m; ++r) {
      const double gr = g[r];
      if (gr == 0.0) continue;
      const std::size_t base = static_cast<std::size_t>(r) * n;
      if (gx) {
        for (int c = 0; c < n; ++c) (*gx)[c] += gr * wv->value[base + c];
      }
      if (gw) {
        for (int c = 0; c < n; ++c) (*gw)[base + c] += gr * xv->value[c];
      }
      if (gb) (*gb)[r] += gr;
    }
  };
  return make_result({m}, std::move(out), std::move(inputs), std::move(backward));
}

Tensor relu(const Tensor& x) {
  return unary(x, [](double v) {
    return v > 0.0 ? std::pair{v, 1.0} : std::pair{0.0, 0.0};
  });
}

Tensor generalized_logistic(const Tensor& x, double q, double steepness) {
  return unary(x, [q, steepness](double v) {
    const double e = q * std::exp(-steepness * v);
    if (!std::isfinite(e)) return std::pair{0.0, 0.0};
    const double y = 1.0 / (1.0 + e);
    // dy/dx = steepness * e / (1 + e)^2 = steepness * y * (1 - y)
    return std::pair{y, steepness * e * y * y};
  });
}

Tensor tanh(const Tensor& x) {
  return unary(x, [](double v) {
    const double y = std::tanh(v);
    return std::pair{y, 1.0 - y * y};
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] + b.values()[i];
  return make_result(a.shape(), std::move(out), {a, b},
                     [](const std::vector<double>& g, GradBuffers& bufs) {
                       for (auto* buf : bufs) {
                         if (!buf) continue;
                         for (std::size_t i = 0; i < g.size(); ++i) (*buf)[i] += g[i];
                       }
                     });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] - b.values()[i];
  return make_result(a.shape(), std::move(out), {a, b},
                     [](const std::vector<double>& g, GradBuffers& bufs) {
                       if (bufs[0]) {
                         for (std::size_t i = 0; i < g.size(); ++i) (*bufs[0])[i] += g[i];
                       }
                       if (bufs[1]) {
                         for (std::size_t i = 0; i < g.size(); ++i) (*bufs[1])[i] -= g[i];
                       }
                     });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * b.values()[i];
  return make_result(a.shape(), std::move(out), {a, b},
                     [av = a.node(), bv = b.node()](const std::vector<double>& g,
                                                    GradBuffers& bufs) {
                       if (bufs[0]) {
                         for (std::size_t i = 0; i < g.size(); ++i)
                           (*bufs[0])[i] += g[i] * bv->value[i];
                       }
                       if (bufs[1]) {
                         for (std::size_t i = 0; i < g.size(); ++i)
                           (*bufs[1])[i] += g[i] * av->value[i];
                       }
                     });
}

Tensor scale(const Tensor& a, double c) {
  return unary(a, [c](double v) { return std::pair{c * v, c}; });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (gradnet::numel(shape) != a.numel()) {
    throw DimensionError("reshape: " + to_string(a.shape()) + " to " +
                         to_string(shape));
  }
  std::vector<double> out(a.values().begin(), a.values().end());
  return make_result(std::move(shape), std::move(out), {a},
                     [](const std::vector<double>& g, GradBuffers& bufs) {
                       for (std::size_t i = 0; i < g.size(); ++i) (*bufs[0])[i] += g[i];
                     });
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.values()) s += v;
  return make_result({1}, {s}, {a},
                     [](const std::vector<double>& g, GradBuffers& bufs) {
                       for (double& v : *bufs[0]) v += g[0];
                     });
}

Tensor max(const Tensor& a) {
  if (a.numel() == 0) throw DimensionError("max of an empty tensor");
  const auto vals = a.values();
  const std::size_t arg =
      static_cast<std::size_t>(std::max_element(vals.begin(), vals.end()) - vals.begin());
  return make_result({1}, {vals[arg]}, {a},
                     [arg](const std::vector<double>& g, GradBuffers& bufs) {
                       (*bufs[0])[arg] += g[0];
                     });
}

Tensor l1_distance(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "l1_distance");
  double s = 0.0;
  std::vector<double> sign(a.numel());
  for (std::size_t i = 0; i < sign.size(); ++i) {
    const double d = a.values()[i] - b.values()[i];
    s += std::abs(d);
    sign[i] = (d > 0.0) - (d < 0.0);
  }
  return make_result({1}, {s}, {a, b},
                     [sign = std::move(sign)](const std::vector<double>& g,
                                              GradBuffers& bufs) {
                       if (bufs[0]) {
                         for (std::size_t i = 0; i < sign.size(); ++i)
                           (*bufs[0])[i] += g[0] * sign[i];
                       }
                       if (bufs[1]) {
                         for (std::size_t i = 0; i < sign.size(); ++i)
                           (*bufs[1])[i] -= g[0] * sign[i];
                       }
                     });
}

Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
Tensor operator*(double c, const Tensor& a) { return scale(a, c); }

void glorot_uniform(Tensor& t, int fan_in, int fan_out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  for (double& v : t.mutable_values()) v = (2.0 * uniform01(rng) - 1.0) * limit;
}

void adam_step(std::span<Tensor> params, AdamState& state) {
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.numel(), 0.0);
      state.s.emplace_back(p.numel(), 0.0);
    }
  }
  if (state.m.size() != params.size()) {
    throw DimensionError("adam_step: parameter list changed between steps");
  }
  ++state.step;
  const auto& cfg = state.config;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = params[k];
    if (!p.requires_grad()) continue;
    auto& m = state.m[k];
    auto& s = state.s[k];
    if (m.size() != p.numel()) throw DimensionError("adam_step: moment shape mismatch");
    const auto g = p.grad();
    auto theta = p.mutable_values();
    for (std::size_t i = 0; i < theta.size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      s[i] = cfg.beta2 * s[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double m_hat = m[i] / bc1;
      const double s_hat = s[i] / bc2;
      theta[i] -= cfg.learning_rate * m_hat / (std::sqrt(s_hat) + cfg.epsilon);
    }
  }
}

}  // namespace mfgvo::gradnet
