// mfgvo: generate data, train, solve, extract object motion, evaluate, render.
//
// Exit codes: 0 success, 1 usage error, 2 data or format error.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mfgvo/dataio.hpp"
#include "mfgvo/egosolver.hpp"
#include "mfgvo/evalkit.hpp"
#include "mfgvo/flowviz.hpp"
#include "mfgvo/format.hpp"
#include "mfgvo/gradnet.hpp"
#include "mfgvo/mfg.hpp"
#include "mfgvo/objmotion.hpp"
#include "mfgvo/synthgen.hpp"

namespace fs = std::filesystem;
using namespace mfgvo;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::string out_dir = ".";
  bool quiet = false;
};

std::string vec3(const Eigen::Vector3d& v) {
  return fmt9(v.x()) + " " + fmt9(v.y()) + " " + fmt9(v.z());
}

fs::path ensure_out_dir(const Globals& g) {
  fs::path dir(g.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory '" + g.out_dir + "'");
  return dir;
}

std::ofstream open_text(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  return out;
}

// key=value text; '#' starts a comment.
std::map<std::string, std::string> read_key_values(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open config '" + path + "'");
  std::map<std::string, std::string> kv;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw FormatError("config line " + std::to_string(line_no) + ": expected key=value");
    }
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw FormatError("config line " + std::to_string(line_no) + ": empty key or value");
    }
    kv[key] = value;
  }
  return kv;
}

double to_double(const std::string& key, const std::string& s) {
  std::size_t pos = 0;
  double v = 0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != s.size() || !std::isfinite(v)) {
    throw FormatError("config: '" + key + "' expects a number, got '" + s + "'");
  }
  return v;
}

int to_int(const std::string& key, const std::string& s) {
  const double v = to_double(key, s);
  if (v != std::floor(v) || std::abs(v) > 1e9) {
    throw FormatError("config: '" + key + "' expects an integer, got '" + s + "'");
  }
  return static_cast<int>(v);
}

SceneConfig scene_config(const std::string& path, const Globals& g) {
  SceneConfig c;
  if (!path.empty()) {
    for (const auto& [k, v] : read_key_values(path)) {
      if (k == "width") c.width = to_int(k, v);
      else if (k == "height") c.height = to_int(k, v);
      else if (k == "focal") c.focal = to_double(k, v);
      else if (k == "camera_height") c.camera_height = to_double(k, v);
      else if (k == "min_depth") c.min_depth = to_double(k, v);
      else if (k == "max_depth") c.max_depth = to_double(k, v);
      else if (k == "max_boxes") c.max_boxes = to_int(k, v);
      else if (k == "max_translation") c.max_translation = to_double(k, v);
      else if (k == "max_rotation") c.max_rotation = to_double(k, v);
      else if (k == "min_objects") c.min_objects = to_int(k, v);
      else if (k == "max_objects") c.max_objects = to_int(k, v);
      else if (k == "max_object_speed") c.max_object_speed = to_double(k, v);
      else if (k == "object_min_depth") c.object_min_depth = to_double(k, v);
      else if (k == "object_max_depth") c.object_max_depth = to_double(k, v);
      else if (k == "noise_sigma") c.noise_sigma = to_double(k, v);
      else if (k == "outlier_fraction") c.outlier_fraction = to_double(k, v);
      else if (k == "outlier_magnitude") c.outlier_magnitude = to_double(k, v);
      else if (k == "smoothing") c.smoothing = to_double(k, v);
      else if (k == "seed") c.seed = static_cast<std::uint64_t>(to_int(k, v));
      else throw FormatError("config: unknown scene key '" + k + "'");
    }
  }
  if (g.seed_given) c.seed = g.seed;
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("config: ") + e.what());
  }
  return c;
}

MfgConfig model_config(const std::string& path, const CameraModel& cam) {
  int hidden = 128;
  std::map<std::string, std::string> kv;
  if (!path.empty()) kv = read_key_values(path);
  if (auto it = kv.find("hidden"); it != kv.end()) hidden = to_int(it->first, it->second);
  if (hidden < 1) throw FormatError("config: hidden must be >= 1");
  MfgConfig c = MfgConfig::make(cam.width, cam.height, hidden);
  c.focal = cam.f;
  for (const auto& [k, v] : kv) {
    if (k == "hidden") continue;
    if (k == "sparsity_weight") c.sparsity_weight = to_double(k, v);
    else if (k == "input_scale") c.input_scale = to_double(k, v);
    else if (k == "learning_rate") c.adam.learning_rate = to_double(k, v);
    else if (k == "beta1") c.adam.beta1 = to_double(k, v);
    else if (k == "beta2") c.adam.beta2 = to_double(k, v);
    else if (k == "epsilon") c.adam.epsilon = to_double(k, v);
    else throw FormatError("config: unknown model key '" + k + "'");
  }
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("config: ") + e.what());
  }
  return c;
}

struct Dataset {
  Manifest manifest;
  std::vector<TrainSample> samples;
};

Dataset load_dataset(const std::string& manifest_path) {
  Dataset d;
  d.manifest = read_manifest(manifest_path);
  const fs::path base = fs::path(manifest_path).parent_path();
  const CameraModel& cam = d.manifest.camera;
  for (const auto& r : d.manifest.records) {
    FlowField px = read_flow((base / r.flow_path).string());
    if (px.width() != cam.width || px.height() != cam.height) {
      throw FormatError("flow '" + r.flow_path + "' does not match the manifest camera");
    }
    d.samples.push_back({pixels_to_normalized(px, cam), r.gt});
  }
  if (d.samples.empty()) throw FormatError("manifest has no records");
  return d;
}

void require_centered(const CameraModel& cam) {
  if (std::abs(cam.cx - (cam.width - 1) / 2.0) > 1e-9 ||
      std::abs(cam.cy - (cam.height - 1) / 2.0) > 1e-9) {
    throw FormatError("the network requires a centered principal point");
  }
}

MfgModel load_model(const std::string& path) {
  try {
    return MfgModel::from_checkpoint(gradnet::load_checkpoint(path));
  } catch (const std::invalid_argument& e) {
    throw FormatError("checkpoint '" + path + "': " + e.what());
  }
}

FlowField load_flow_for(const std::string& path, const CameraModel& cam) {
  FlowField px = read_flow(path);
  if (px.width() != cam.width || px.height() != cam.height) {
    throw FormatError("flow is " + std::to_string(px.width()) + "x" +
                      std::to_string(px.height()) + ", expected " +
                      std::to_string(cam.width) + "x" + std::to_string(cam.height));
  }
  return pixels_to_normalized(px, cam);
}

std::optional<double> topk_value(const std::optional<double>& k) {
  if (k && !(*k > 0.0 && *k <= 100.0)) throw UsageError("--topk must lie in (0, 100]");
  return k;
}

// ---- subcommands ----

void cmd_generate(const Globals& g, const std::string& config_path, int count,
                  bool sequence) {
  if (count < 1) throw UsageError("--count must be >= 1");
  const SceneConfig cfg = scene_config(config_path, g);
  const CameraModel cam = cfg.camera();
  const fs::path dir = ensure_out_dir(g);
  fs::create_directories(dir / "frames");

  std::vector<SceneSample> samples;
  Trajectory poses;
  if (sequence) {
    if (count < 2) throw UsageError("--sequence needs --count >= 2");
    auto seq = generate_sequence(cfg, count);
    samples = std::move(seq.samples);
    poses = std::move(seq.trajectory);
  } else {
    samples = generate(cfg, count);
  }

  Manifest m;
  m.camera = cam;
  m.sequence = sequence;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    char id[24];
    std::snprintf(id, sizeof id, "%06zu", i);
    ManifestRecord r;
    r.id = id;
    r.flow_path = "frames/" + r.id + ".flo";
    r.depth_path = "frames/" + r.id + ".dep";
    r.mask_path = "frames/" + r.id + ".msk";
    r.gt = samples[i].gt;
    write_flow((dir / r.flow_path).string(), normalized_to_pixels(samples[i].flow, cam));
    write_depth((dir / r.depth_path).string(), samples[i].rho);
    write_mask((dir / r.mask_path).string(), samples[i].object_mask);
    m.records.push_back(std::move(r));
  }
  write_manifest((dir / "manifest.txt").string(), m);
  if (sequence) write_pose_file((dir / "poses.txt").string(), poses);
  if (!g.quiet) {
    std::cout << "generated " << samples.size() << " samples in "
              << (dir / "manifest.txt").string() << '\n';
  }
}

void cmd_train(const Globals& g, const std::string& dataset_path, int epochs,
               const std::string& config_path, std::string checkpoint_out) {
  if (epochs < 1) throw UsageError("--epochs must be >= 1");
  const Dataset d = load_dataset(dataset_path);
  require_centered(d.manifest.camera);
  const MfgConfig cfg = model_config(config_path, d.manifest.camera);
  const fs::path dir = ensure_out_dir(g);
  if (checkpoint_out.empty()) checkpoint_out = (dir / "model.ckpt").string();

  MfgModel model(cfg, g.seed);
  const TrainLog log = train(model, d.samples, epochs, g.seed);
  gradnet::save_checkpoint(checkpoint_out, model.to_checkpoint());
  auto csv = open_text(dir / "train_log.csv");
  write_train_log(csv, log);
  if (!g.quiet) {
    for (const auto& e : log) {
      std::cout << "epoch " << e.epoch << " L_t " << fmt9(e.translation) << " L_w "
                << fmt9(e.rotation) << " L_s " << fmt9(e.sparsity) << " active "
                << fmt9(e.active) << '\n';
    }
    std::cout << "checkpoint " << checkpoint_out << '\n';
  }
}

void cmd_predict(const Globals& g, const std::string& ckpt, const std::string& flow_path,
                 std::optional<double> topk, const std::string& fields_prefix) {
  topk = topk_value(topk);
  const MfgModel model = load_model(ckpt);
  const CameraModel cam = model.camera();
  const FlowField flow = load_flow_for(flow_path, cam);
  MfgOutput out = model.forward(flow);
  if (topk) out = model.decode(topk_mask(out.hidden, *topk));
  const EgoMotion ego{recover_translation(out.v_t, cam), recover_rotation(out.v_w, cam)};
  std::cout << "t " << vec3(ego.t) << '\n';
  std::cout << "omega " << vec3(ego.omega) << '\n';
  if (!fields_prefix.empty()) {
    const fs::path dir = ensure_out_dir(g);
    write_flow((dir / (fields_prefix + "_t.flo")).string(), normalized_to_pixels(out.v_t, cam));
    write_flow((dir / (fields_prefix + "_w.flo")).string(), normalized_to_pixels(out.v_w, cam));
  }
}

void cmd_solve(const Globals&, const std::string& flow_path, bool robust, double focal) {
  if (!(focal > 0.0)) throw UsageError("--focal must be positive");
  const FlowField px = read_flow(flow_path);
  const CameraModel cam = CameraModel::centered(focal, px.width(), px.height());
  const FlowField flow = pixels_to_normalized(px, cam);
  RobustSolveOptions opts;
  // Without --robust every pixel is an inlier: plain least squares.
  if (!robust) opts.huber_delta = std::numeric_limits<double>::infinity();
  const SolveReport r = robust_egomotion(flow, cam, opts);
  int inliers = 0;
  for (auto m : r.inlier_mask) inliers += m ? 1 : 0;
  std::cout << "t " << vec3(r.ego.t) << '\n';
  std::cout << "omega " << vec3(r.ego.omega) << '\n';
  std::cout << "residual_rms " << fmt9(r.residual_rms) << '\n';
  std::cout << "objective " << fmt9(r.objective) << '\n';
  std::cout << "inliers " << inliers << " of " << r.inlier_mask.size() << '\n';
  std::cout << "degenerate " << (r.degenerate ? 1 : 0) << '\n';
  std::cout << "translation_ambiguous " << (r.translation_ambiguous ? 1 : 0) << '\n';
}

void cmd_extract(const Globals& g, const std::string& ckpt, const std::string& flow_path,
                 const std::string& depth_path, std::optional<double> topk,
                 const ObjMotionParams& params) {
  topk = topk_value(topk);
  try {
    params.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const MfgModel model = load_model(ckpt);
  const CameraModel cam = model.camera();
  const FlowField flow = load_flow_for(flow_path, cam);
  const InverseDepthMap rho = read_depth(depth_path);
  if (!rho.same_shape(flow)) throw FormatError("depth and flow differ in size");
  MfgOutput out = model.forward(flow);
  if (topk) out = model.decode(topk_mask(out.hidden, *topk));
  const ObjectResult res = extract_object_motion(flow, out.v_t, out.v_w, rho, params);

  const fs::path dir = ensure_out_dir(g);
  const FlowField vel_px = normalized_to_pixels(res.velocity, cam);
  write_mask((dir / "object_mask.msk").string(), res.mask);
  write_flow((dir / "object_velocity.flo").string(), vel_px);
  write_raster((dir / "object_mask.ppm").string(), mask_to_image(res.mask));
  write_raster((dir / "object_velocity.ppm").string(), flow_to_image(vel_px));
  write_raster((dir / "residual.ppm").string(),
               flow_to_image(normalized_to_pixels(res.residual, cam)));

  int count = 0;
  Eigen::Vector2d sum = Eigen::Vector2d::Zero();
  for (std::size_t i = 0; i < res.mask.size(); ++i) {
    if (res.mask[i]) {
      ++count;
      sum += vel_px[i];
    }
  }
  const Eigen::Vector2d mean = count ? Eigen::Vector2d(sum / count) : Eigen::Vector2d::Zero();
  std::cout << "object_pixels " << count << '\n';
  std::cout << "mean_velocity_px " << fmt9(mean.x()) << ' ' << fmt9(mean.y()) << '\n';
}

std::vector<double> parse_k_list(const std::string& s) {
  std::vector<double> ks;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    std::size_t pos = 0;
    double k = 0;
    try {
      k = std::stod(tok, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != tok.size() || !(k > 0.0 && k <= 100.0)) {
      throw UsageError("--sparsity-sweep entries must be numbers in (0, 100], got '" + tok + "'");
    }
    ks.push_back(k);
  }
  if (ks.empty()) throw UsageError("--sparsity-sweep needs at least one k");
  return ks;
}

void cmd_eval(const Globals& g, const std::string& ckpt, const std::string& dataset_path,
              const std::string& metric, const std::string& predictor,
              const std::string& sweep, const std::string& sweep_metric,
              std::optional<double> topk) {
  topk = topk_value(topk);
  if (predictor == "mfg" && ckpt.empty()) throw UsageError("--predictor mfg needs --checkpoint");
  if (!sweep.empty() && predictor != "mfg") {
    throw UsageError("--sparsity-sweep needs --predictor mfg");
  }
  const std::vector<double> ks = sweep.empty() ? std::vector<double>{} : parse_k_list(sweep);
  const Dataset d = load_dataset(dataset_path);
  const CameraModel& cam = d.manifest.camera;

  std::optional<MfgModel> model;
  if (predictor == "mfg") {
    model = load_model(ckpt);
    const CameraModel mc = model->camera();
    if (mc.width != cam.width || mc.height != cam.height || mc.f != cam.f) {
      throw FormatError("checkpoint camera does not match the dataset camera");
    }
  }
  std::vector<EgoMotion> pred, gt;
  for (const auto& s : d.samples) {
    gt.push_back(s.gt);
    if (predictor == "gt") {
      pred.push_back(s.gt);
    } else if (predictor == "robust") {
      pred.push_back(robust_egomotion(s.flow, cam).ego);
    } else {
      pred.push_back(predict_egomotion(*model, s.flow, topk));
    }
  }

  const fs::path dir = ensure_out_dir(g);
  if (metric == "ate") {
    if (!d.manifest.sequence) throw FormatError("ATE needs a sequence dataset");
    const MetricReport r = ate(integrate_trajectory(pred), integrate_trajectory(gt));
    auto csv = open_text(dir / "ate.csv");
    write_ate_csv(csv, r);
    std::cout << "ate_mean " << fmt9(r.mean) << '\n';
    std::cout << "ate_std " << fmt9(r.std) << '\n';
  } else {
    const RpeReport r = rpe(pred, gt);
    auto csv = open_text(dir / "rpe.csv");
    write_rpe_csv(csv, r);
    std::cout << "rpe_translation_mean " << fmt9(r.translation.mean) << '\n';
    std::cout << "rpe_translation_std " << fmt9(r.translation.std) << '\n';
    std::cout << "rpe_rotation_mean " << fmt9(r.rotation.mean) << '\n';
    std::cout << "rpe_rotation_std " << fmt9(r.rotation.std) << '\n';
  }

  if (!ks.empty()) {
    const bool use_ate = sweep_metric == "ate";
    if (use_ate && !d.manifest.sequence) throw FormatError("ATE sweep needs a sequence dataset");
    const auto rows = sparsity_sweep(*model, d.samples, ks,
                                     use_ate ? SweepMetric::kAte : SweepMetric::kFieldError);
    auto csv = open_text(dir / "sweep.csv");
    write_sweep_csv(csv, rows, use_ate ? "ate" : "field_error");
    for (const auto& row : rows) {
      std::cout << "sweep k " << fmt9(row.k) << ' ' << sweep_metric << ' ' << fmt9(row.value)
                << '\n';
    }
  }
}

void cmd_viz(const Globals& g, const std::string& flow_path,
             const std::vector<std::string>& traj_paths, const std::vector<std::string>& labels,
             std::optional<double> max_mag, std::string out) {
  if (flow_path.empty() == traj_paths.empty()) {
    throw UsageError("give exactly one of --flow or --trajectory");
  }
  if (max_mag && !(*max_mag >= 0.0)) throw UsageError("--max must be non-negative");
  if (!labels.empty() && labels.size() != traj_paths.size()) {
    throw UsageError("--label count must match --trajectory count");
  }
  RgbImage image;
  if (!flow_path.empty()) {
    image = flow_to_image(read_flow(flow_path), max_mag);
  } else {
    std::vector<Trajectory> trajs;
    for (const auto& p : traj_paths) trajs.push_back(read_pose_file(p));
    image = trajectory_plot(trajs, labels).image;
  }
  if (fs::path(out).is_relative()) out = (ensure_out_dir(g) / out).string();
  write_raster(out, image);
  if (!g.quiet) std::cout << "wrote " << out << '\n';
}

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Egomotion from optic flow with motion field generators"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "Random seed")->each([&](const std::string&) {
    g.seed_given = true;
  });
  app.add_option("--out-dir", g.out_dir, "Directory for written artifacts");
  app.add_flag("--quiet", g.quiet, "Suppress progress output");

  std::string config, dataset, checkpoint, checkpoint_out, flow, depth, fields_prefix;
  std::string metric = "ate", predictor = "mfg", sweep, sweep_metric = "field", out;
  std::vector<std::string> trajectories, labels;
  int count = 100, epochs = 50;
  bool sequence = false, robust = false;
  double focal = 28.0;
  std::optional<double> topk, max_mag;
  ObjMotionParams params;

  auto* gen = app.add_subcommand("generate", "Write a synthetic dataset");
  gen->add_option("--config", config, "key=value scene config file")->check(CLI::ExistingFile);
  gen->add_option("--count", count, "Number of samples");
  gen->add_flag("--sequence", sequence, "Generate one consecutive sequence plus poses.txt");

  auto* tr = app.add_subcommand("train", "Train the network on a dataset");
  tr->add_option("--dataset", dataset, "Manifest file")->required();
  tr->add_option("--epochs", epochs, "Training epochs");
  tr->add_option("--config", config, "key=value model config file")->check(CLI::ExistingFile);
  tr->add_option("--checkpoint-out", checkpoint_out, "Checkpoint path (default <out-dir>/model.ckpt)");

  auto* pr = app.add_subcommand("predict", "Predict egomotion with a trained network");
  pr->add_option("--checkpoint", checkpoint, "Model checkpoint")->required();
  pr->add_option("--flow", flow, "Flow file (pixels/frame)")->required();
  pr->add_option("--topk", topk, "Keep the top k percent of hidden units");
  pr->add_option("--fields-out", fields_prefix, "Write <prefix>_t.flo and <prefix>_w.flo");

  auto* so = app.add_subcommand("solve", "Classical subspace solver on one flow file");
  so->add_option("--flow", flow, "Flow file (pixels/frame)")->required();
  so->add_flag("--robust", robust, "Huber loss instead of least squares");
  so->add_option("--focal", focal, "Focal length in pixels");

  auto* ex = app.add_subcommand("extract", "Segment independently moving objects");
  ex->add_option("--checkpoint", checkpoint, "Model checkpoint")->required();
  ex->add_option("--flow", flow, "Flow file (pixels/frame)")->required();
  ex->add_option("--depth", depth, "Inverse depth file")->required();
  ex->add_option("--topk", topk, "Keep the top k percent of hidden units");
  ex->add_option("--theta-d", params.theta_d, "Residual filter threshold");
  ex->add_option("--theta-p", params.theta_p, "Depth-weighted filter threshold");
  ex->add_option("--depth-gate", params.depth_gate, "Normalized depth gate");

  auto* ev = app.add_subcommand("eval", "Evaluate predictions on a dataset");
  ev->add_option("--checkpoint", checkpoint, "Model checkpoint");
  ev->add_option("--dataset", dataset, "Manifest file")->required();
  ev->add_option("--metric", metric, "ate or rpe")->check(CLI::IsMember({"ate", "rpe"}));
  ev->add_option("--predictor", predictor, "mfg, robust or gt")
      ->check(CLI::IsMember({"mfg", "robust", "gt"}));
  ev->add_option("--topk", topk, "Keep the top k percent of hidden units");
  ev->add_option("--sparsity-sweep", sweep, "Comma-separated k list, e.g. 100,50,25");
  ev->add_option("--sweep-metric", sweep_metric, "field or ate")
      ->check(CLI::IsMember({"field", "ate"}));

  auto* vz = app.add_subcommand("viz", "Render a flow file or trajectories to P6");
  vz->add_option("--flow", flow, "Flow file");
  vz->add_option("--trajectory", trajectories, "Pose file (repeatable)");
  vz->add_option("--label", labels, "Legend label per trajectory (repeatable)");
  vz->add_option("--max", max_mag, "Magnitude mapped to full saturation");
  vz->add_option("--out", out, "Output .ppm path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "mfgvo: usage error: " << one_line(e.what()) << '\n';
    return 1;
  }

  try {
    if (*gen) cmd_generate(g, config, count, sequence);
    else if (*tr) cmd_train(g, dataset, epochs, config, checkpoint_out);
    else if (*pr) cmd_predict(g, checkpoint, flow, topk, fields_prefix);
    else if (*so) cmd_solve(g, flow, robust, focal);
    else if (*ex) cmd_extract(g, checkpoint, flow, depth, topk, params);
    else if (*ev) cmd_eval(g, checkpoint, dataset, metric, predictor, sweep, sweep_metric, topk);
    else if (*vz) cmd_viz(g, flow, trajectories, labels, max_mag, out);
  } catch (const UsageError& e) {
    std::cerr << "mfgvo: usage error: " << one_line(e.what()) << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "mfgvo: error: " << one_line(e.what()) << '\n';
    return 2;
  }
  return 0;
}
