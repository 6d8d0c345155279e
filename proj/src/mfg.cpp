#include "mfgvo/mfg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>

#include "mfgvo/egosolver.hpp"
#include "mfgvo/format.hpp"

namespace mfgvo {

using gradnet::Tensor;

MfgConfig MfgConfig::desk_default() { return make(48, 16, 128); }

MfgConfig MfgConfig::make(int width, int height, int hidden) {
  MfgConfig cfg;
  cfg.width = width;
  cfg.height = height;
  cfg.hidden = hidden;
  cfg.focal = 28.0 * width / 48.0;
  int h = height, w = width;
  for (int channels : {16, 32, 64}) {
    EncoderLayer layer{channels, {4, 4}, {2, 2}, {1, 1}};
    if (h < 4 || w < 4) layer = EncoderLayer{channels, {1, 1}, {1, 1}, {0, 0}};
    cfg.encoder.push_back(layer);
    h = gradnet::conv_output_extent(h, layer.kernel[0], layer.stride[0], layer.padding[0]);
    w = gradnet::conv_output_extent(w, layer.kernel[1], layer.stride[1], layer.padding[1]);
  }
  cfg.encoder.push_back(EncoderLayer{hidden, {h, w}, {1, 1}, {0, 0}});
  return cfg;
}

void MfgConfig::validate() const {
  if (width < 1 || height < 1) throw std::invalid_argument("MfgConfig: bad input size");
  if (hidden < 1) throw std::invalid_argument("MfgConfig: hidden must be >= 1");
  if (encoder.empty()) throw std::invalid_argument("MfgConfig: empty encoder");
  if (!(focal > 0.0)) throw std::invalid_argument("MfgConfig: focal must be positive");
  if (!(input_scale > 0.0)) throw std::invalid_argument("MfgConfig: input_scale must be positive");
  int h = height, w = width;
  try {
    for (const auto& l : encoder) {
      if (l.out_channels < 1) throw std::invalid_argument("MfgConfig: layer with no channels");
      h = gradnet::conv_output_extent(h, l.kernel[0], l.stride[0], l.padding[0]);
      w = gradnet::conv_output_extent(w, l.kernel[1], l.stride[1], l.padding[1]);
    }
  } catch (const DimensionError& e) {
    throw std::invalid_argument(std::string("MfgConfig: ") + e.what());
  }
  if (h != 1 || w != 1 || encoder.back().out_channels != hidden) {
    throw std::invalid_argument(
        "MfgConfig: encoder must end in exactly `hidden` channels at 1x1");
  }
}

std::vector<double> flatten(const FlowField& field) {
  std::vector<double> out;
  out.reserve(2 * field.size());
  for (const auto& v : field) {
    out.push_back(v.x());
    out.push_back(v.y());
  }
  return out;
}

FlowField unflatten(std::span<const double> values, int width, int height) {
  FlowField out(width, height);
  if (values.size() != 2 * out.size()) {
    throw DimensionError("unflatten: value count does not match field size");
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = {values[2 * i], values[2 * i + 1]};
  }
  return out;
}

MfgModel::MfgModel(MfgConfig config, std::uint64_t seed)
    : config_(std::move(config)) {
  config_.validate();
  std::mt19937_64 rng(seed);
  int channels = 2;
  for (const auto& l : config_.encoder) {
    Tensor kernel = Tensor::zeros({l.out_channels, channels, l.kernel[0], l.kernel[1]}, true);
    const int area = l.kernel[0] * l.kernel[1];
    gradnet::glorot_uniform(kernel, channels * area, l.out_channels * area, rng);
    params_.push_back(kernel);
    params_.push_back(Tensor::zeros({l.out_channels}, true));
    channels = l.out_channels;
  }
  const int out = 2 * config_.width * config_.height;
  for (int k = 0; k < 2; ++k) {
    Tensor dec = Tensor::zeros({out, config_.hidden}, true);
    gradnet::glorot_uniform(dec, config_.hidden, out, rng);
    params_.push_back(dec);
  }
}

MfgModel MfgModel::clone() const {
  MfgModel copy;
  copy.config_ = config_;
  for (const auto& p : params_) {
    auto vals = p.values();
    copy.params_.push_back(
        Tensor::from(p.shape(), std::vector<double>(vals.begin(), vals.end()), true));
  }
  return copy;
}

Tensor MfgModel::input_tensor(const FlowField& flow) const {
  if (!flow.same_shape(config_.width, config_.height)) {
    throw DimensionError("MFG input is " + std::to_string(flow.width()) + "x" +
                         std::to_string(flow.height()) + ", model expects " +
                         std::to_string(config_.width) + "x" +
                         std::to_string(config_.height));
  }
  const std::size_t plane = flow.size();
  std::vector<double> vals(2 * plane);
  const double inv = 1.0 / config_.input_scale;
  for (std::size_t i = 0; i < plane; ++i) {
    vals[i] = flow[i].x() * inv;
    vals[plane + i] = flow[i].y() * inv;
  }
  return Tensor::from({1, 2, config_.height, config_.width}, std::move(vals));
}

MfgModel::Graph MfgModel::forward_graph(const FlowField& flow) const {
  Tensor x = input_tensor(flow);
  for (std::size_t l = 0; l < config_.encoder.size(); ++l) {
    const auto& layer = config_.encoder[l];
    x = gradnet::relu(gradnet::conv2d(x, params_[2 * l], params_[2 * l + 1],
                                      {layer.stride, layer.padding}));
  }
  Tensor hidden = gradnet::reshape(x, {config_.hidden});
  return {gradnet::linear(hidden, decoder_t()), gradnet::linear(hidden, decoder_w()),
          hidden};
}

MfgOutput MfgModel::forward(const FlowField& flow) const {
  const Graph g = forward_graph(flow);
  MfgOutput out;
  out.v_t = unflatten(g.v_t.values(), config_.width, config_.height);
  out.v_w = unflatten(g.v_w.values(), config_.width, config_.height);
  out.hidden.assign(g.hidden.values().begin(), g.hidden.values().end());
  return out;
}

MfgOutput MfgModel::decode(std::span<const double> hidden) const {
  if (hidden.size() != static_cast<std::size_t>(config_.hidden)) {
    throw DimensionError("decode: hidden vector has wrong length");
  }
  const Tensor h = Tensor::from({config_.hidden}, {hidden.begin(), hidden.end()});
  MfgOutput out;
  out.v_t = unflatten(gradnet::linear(h, decoder_t()).values(), config_.width, config_.height);
  out.v_w = unflatten(gradnet::linear(h, decoder_w()).values(), config_.width, config_.height);
  out.hidden.assign(hidden.begin(), hidden.end());
  return out;
}

namespace {

std::vector<double> config_record(const MfgConfig& c) {
  return {static_cast<double>(c.width), static_cast<double>(c.height), c.focal,
          static_cast<double>(c.hidden), c.sparsity_weight, c.input_scale,
          c.adam.learning_rate, c.adam.beta1, c.adam.beta2, c.adam.epsilon};
}

}  // namespace

std::vector<gradnet::NamedTensor> MfgModel::to_checkpoint() const {
  std::vector<gradnet::NamedTensor> out;
  out.push_back({"config", {10}, config_record(config_)});
  std::vector<double> layers;
  for (const auto& l : config_.encoder) {
    layers.insert(layers.end(),
                  {double(l.out_channels), double(l.kernel[0]), double(l.kernel[1]),
                   double(l.stride[0]), double(l.stride[1]), double(l.padding[0]),
                   double(l.padding[1])});
  }
  out.push_back({"encoder.layout", {static_cast<int>(config_.encoder.size()), 7}, layers});
  for (std::size_t l = 0; l < config_.encoder.size(); ++l) {
    const auto& k = params_[2 * l];
    const auto& b = params_[2 * l + 1];
    out.push_back({"encoder." + std::to_string(l) + ".kernel", k.shape(),
                   {k.values().begin(), k.values().end()}});
    out.push_back({"encoder." + std::to_string(l) + ".bias", b.shape(),
                   {b.values().begin(), b.values().end()}});
  }
  out.push_back({"decoder.translation", decoder_t().shape(),
                 {decoder_t().values().begin(), decoder_t().values().end()}});
  out.push_back({"decoder.rotation", decoder_w().shape(),
                 {decoder_w().values().begin(), decoder_w().values().end()}});
  return out;
}

MfgModel MfgModel::from_checkpoint(const std::vector<gradnet::NamedTensor>& entries) {
  auto find = [&](const std::string& name) -> const gradnet::NamedTensor& {
    for (const auto& e : entries) {
      if (e.name == name) return e;
    }
    throw FormatError("checkpoint: missing entry '" + name + "'");
  };
  auto as_int = [](double v) {
    if (v != std::floor(v) || v < 0 || v > 1e9) {
      throw FormatError("checkpoint: non-integral layout value");
    }
    return static_cast<int>(v);
  };

  const auto& cfg_rec = find("config");
  if (cfg_rec.values.size() != 10) throw FormatError("checkpoint: bad config record");
  MfgConfig cfg;
  cfg.width = as_int(cfg_rec.values[0]);
  cfg.height = as_int(cfg_rec.values[1]);
  cfg.focal = cfg_rec.values[2];
  cfg.hidden = as_int(cfg_rec.values[3]);
  cfg.sparsity_weight = cfg_rec.values[4];
  cfg.input_scale = cfg_rec.values[5];
  cfg.adam = {cfg_rec.values[6], cfg_rec.values[7], cfg_rec.values[8], cfg_rec.values[9]};

  const auto& layout = find("encoder.layout");
  if (layout.shape.size() != 2 || layout.shape[1] != 7) {
    throw FormatError("checkpoint: bad encoder layout");
  }
  for (int l = 0; l < layout.shape[0]; ++l) {
    const double* r = &layout.values[static_cast<std::size_t>(l) * 7];
    cfg.encoder.push_back({as_int(r[0]), {as_int(r[1]), as_int(r[2])},
                           {as_int(r[3]), as_int(r[4])}, {as_int(r[5]), as_int(r[6])}});
  }
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  }

  MfgModel model;
  model.config_ = cfg;
  auto load = [&](const std::string& name, const gradnet::Shape& expected) {
    const auto& e = find(name);
    if (e.shape != expected) {
      throw FormatError("checkpoint: entry '" + name + "' has shape " +
                        gradnet::to_string(e.shape) + ", expected " +
                        gradnet::to_string(expected));
    }
    model.params_.push_back(Tensor::from(e.shape, e.values, true));
  };
  int channels = 2;
  for (std::size_t l = 0; l < cfg.encoder.size(); ++l) {
    const auto& layer = cfg.encoder[l];
    load("encoder." + std::to_string(l) + ".kernel",
         {layer.out_channels, channels, layer.kernel[0], layer.kernel[1]});
    load("encoder." + std::to_string(l) + ".bias", {layer.out_channels});
    channels = layer.out_channels;
  }
  const int out = 2 * cfg.width * cfg.height;
  load("decoder.translation", {out, cfg.hidden});
  load("decoder.rotation", {out, cfg.hidden});
  return model;
}

PredictionLosses prediction_losses(const FlowField& pred_t, const FlowField& pred_w,
                                   const FlowField& target_t,
                                   const FlowField& target_w) {
  require_same_shape(pred_t, target_t, "prediction_losses");
  require_same_shape(pred_w, target_w, "prediction_losses");
  PredictionLosses out;
  for (std::size_t i = 0; i < pred_t.size(); ++i) {
    out.translation += (target_t[i] - pred_t[i]).lpNorm<1>();
  }
  for (std::size_t i = 0; i < pred_w.size(); ++i) {
    out.rotation += (target_w[i] - pred_w[i]).lpNorm<1>();
  }
  return out;
}

LossWeights loss_weights(const FlowField& v_t, const FlowField& v_w) {
  constexpr double kFloor = 1e-12;
  const double nt = squared_norm(v_t);
  const double nw = squared_norm(v_w);
  return {std::max(nw / std::max(nt, kFloor), 1.0),
          std::max(nt / std::max(nw, kFloor), 1.0)};
}

double generalized_logistic(double h, double q, double steepness) {
  return 1.0 / (1.0 + q * std::exp(-steepness * h));
}

double sparsity_loss(std::span<const double> hidden) {
  double s = 0.0;
  for (double h : hidden) s += generalized_logistic(h);
  return s;
}

int active_count(std::span<const double> hidden) {
  return static_cast<int>(std::count_if(hidden.begin(), hidden.end(),
                                        [](double h) { return h > kActiveThreshold; }));
}

std::pair<Tensor, LossBreakdown> total_loss_graph(const MfgModel& model,
                                                  const TrainSample& sample) {
  const CameraModel cam = model.camera();
  const FlowField target_t = translational_field(sample.gt.t, cam);
  const FlowField target_w = rotational_field(sample.gt.omega, cam);
  const LossWeights w = loss_weights(target_t, target_w);

  const auto g = model.forward_graph(sample.flow);
  const std::size_t n = 2 * target_t.size();
  const Tensor l_t = gradnet::l1_distance(
      g.v_t, Tensor::from({static_cast<int>(n)}, flatten(target_t)));
  const Tensor l_w = gradnet::l1_distance(
      g.v_w, Tensor::from({static_cast<int>(n)}, flatten(target_w)));
  const Tensor l_s = gradnet::sum(gradnet::generalized_logistic(g.hidden));
  const double ws = model.config().sparsity_weight;
  const Tensor total =
      w.translation * l_t + w.rotation * l_w + ws * l_s;

  LossBreakdown b;
  b.total = total.item();
  b.translation = l_t.item();
  b.rotation = l_w.item();
  b.sparsity = l_s.item();
  b.weights = w;
  b.active = active_count(g.hidden.values());
  return {total, b};
}

LossBreakdown total_loss(const MfgModel& model, const TrainSample& sample) {
  return total_loss_graph(model, sample).second;
}

TrainLog train(MfgModel& model, const std::vector<TrainSample>& dataset,
               int epochs, std::uint64_t seed) {
  if (dataset.empty()) throw std::invalid_argument("train: empty dataset");
  TrainLog log;
  gradnet::AdamState adam{model.config().adam, 0, {}, {}};
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  auto& params = model.parameters();

  for (int epoch = 1; epoch <= epochs; ++epoch) {
    // Fisher-Yates with a fixed uniform mapping, stable across standard
    // library implementations.
    for (std::size_t i = order.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(gradnet::uniform01(rng) * i);
      std::swap(order[i - 1], order[std::min(j, i - 1)]);
    }
    EpochStats stats;
    stats.epoch = epoch;
    int used = 0;
    for (std::size_t idx : order) {
      const auto& sample = dataset[idx];
      if (sample.gt.t.isZero(0.0) && sample.gt.omega.isZero(0.0)) continue;
      for (auto& p : params) p.zero_grad();
      auto [loss, parts] = total_loss_graph(model, sample);
      loss.backward();
      gradnet::adam_step(params, adam);
      stats.translation += parts.translation;
      stats.rotation += parts.rotation;
      stats.sparsity += parts.sparsity;
      stats.active += parts.active;
      ++used;
    }
    if (used > 0) {
      stats.translation /= used;
      stats.rotation /= used;
      stats.sparsity /= used;
      stats.active /= used;
    }
    log.push_back(stats);
  }
  for (auto& p : params) p.zero_grad();
  return log;
}

void write_train_log(std::ostream& out, const TrainLog& log) {
  out << "epoch,L_t,L_w,L_s,active_count\n";
  for (const auto& e : log) {
    out << e.epoch << ',' << fmt9(e.translation) << ',' << fmt9(e.rotation) << ','
        << fmt9(e.sparsity) << ',' << fmt9(e.active) << '\n';
  }
}

std::vector<double> topk_mask(std::span<const double> hidden, double k_percent) {
  if (!(k_percent > 0.0 && k_percent <= 100.0)) {
    throw std::invalid_argument("topk_mask: k must be in (0, 100]");
  }
  const std::size_t m = hidden.size();
  const auto keep = std::min<std::size_t>(
      m, static_cast<std::size_t>(std::ceil(k_percent * static_cast<double>(m) / 100.0 - 1e-9)));
  std::vector<std::size_t> idx(m);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return hidden[a] > hidden[b]; });
  std::vector<double> out(m, 0.0);
  for (std::size_t i = 0; i < keep; ++i) out[idx[i]] = hidden[idx[i]];
  return out;
}

std::pair<FlowField, FlowField> decode_basis(const MfgModel& model, int neuron) {
  const int m = model.config().hidden;
  if (neuron < 0 || neuron >= m) {
    throw std::out_of_range("decode_basis: neuron " + std::to_string(neuron) +
                            " outside [0, " + std::to_string(m) + ")");
  }
  const auto column = [&](const Tensor& dec) {
    const std::size_t rows = static_cast<std::size_t>(dec.dim(0));
    std::vector<double> col(rows);
    for (std::size_t r = 0; r < rows; ++r) col[r] = dec.values()[r * m + neuron];
    return unflatten(col, model.config().width, model.config().height);
  };
  return {column(model.decoder_t()), column(model.decoder_w())};
}

EgoMotion predict_egomotion(const MfgModel& model, const FlowField& flow,
                            std::optional<double> k_percent) {
  MfgOutput out = model.forward(flow);
  if (k_percent) out = model.decode(topk_mask(out.hidden, *k_percent));
  const CameraModel cam = model.camera();
  return {recover_translation(out.v_t, cam), recover_rotation(out.v_w, cam)};
}

}  // namespace mfgvo
