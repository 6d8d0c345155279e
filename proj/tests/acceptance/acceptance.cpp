// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "test_support.hpp"

#include "mfgvo/dataio.hpp"
#include "mfgvo/egosolver.hpp"
#include "mfgvo/evalkit.hpp"
#include "mfgvo/gradnet.hpp"
#include "mfgvo/mfg.hpp"
#include "mfgvo/objmotion.hpp"
#include "mfgvo/synthgen.hpp"

using namespace mfgvo;
using mfgvo::testing::angle_deg;
using mfgvo::testing::random_vec3;
using mfgvo::testing::uniform;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (!detail.empty()) detail += "; ";
      detail += "failed: " + what;
    }
  }
  void note(const std::string& text) {
    if (!detail.empty()) detail += "; ";
    detail += text;
  }
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// ---------------------------------------------------------------- CLI helper

struct Run {
  int code = -1;
  std::string out;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

class Sandbox {
 public:
  explicit Sandbox(const std::string& name)
      : dir_(fs::temp_directory_path() / ("mfgvo_accept_" + name)) {
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  ~Sandbox() { fs::remove_all(dir_); }

  std::string path(const std::string& rel) const { return (dir_ / rel).string(); }

  Run run(const std::string& args) const {
    const std::string out = path(".stdout");
    const std::string cmd = std::string("'") + MFGVO_CLI_PATH + "' " + args + " >'" + out +
                            "' 2>/dev/null";
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out)};
  }

  void write(const std::string& rel, const std::string& text) const {
    std::ofstream(path(rel), std::ios::binary) << text;
  }

  std::map<std::string, std::string> snapshot(const std::string& rel) const {
    std::map<std::string, std::string> files;
    const fs::path root = dir_ / rel;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
      if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = slurp(e.path());
    }
    return files;
  }

 private:
  fs::path dir_;
};

std::string q(const std::string& s) { return "'" + s + "'"; }

// ---------------------------------------------------------------- criteria

Outcome geometry_round_trip() {
  Outcome o;
  const CameraModel cam = CameraModel::centered(30.0, 32, 32);
  std::mt19937_64 rng(1001);
  double worst_t = 0.0, worst_w = 0.0, worst_compose = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const EgoMotion ego{random_vec3(rng, 2.0), random_vec3(rng, 0.1)};
    const InverseDepthMap rho = mfgvo::testing::random_rho(rng, 32, 32);
    const FlowField vt = translational_field(ego.t, cam);
    const FlowField vw = rotational_field(ego.omega, cam);
    worst_t = std::max(worst_t, (recover_translation(vt, cam) - ego.t).cwiseAbs().maxCoeff());
    worst_w = std::max(worst_w, (recover_rotation(vw, cam) - ego.omega).cwiseAbs().maxCoeff());
    const FlowField full = motion_field(ego, rho, cam);
    for (std::size_t k = 0; k < full.size(); ++k) {
      worst_compose = std::max(worst_compose, (full[k] - (rho[k] * vt[k] + vw[k])).norm());
    }
  }
  o.require(worst_t <= 1e-10, "t error " + num(worst_t));
  o.require(worst_w <= 1e-10, "omega error " + num(worst_w));
  o.require(worst_compose <= 1e-12, "rho*v_t + v_w composition " + num(worst_compose));
  o.note("max |t err| " + num(worst_t) + ", max |omega err| " + num(worst_w));
  return o;
}

// Scene with depth variation; a fraction of pixels replaced by uniform junk.
SolveReport solve_scene(std::uint64_t seed, double outlier_fraction, EgoMotion& ego) {
  const CameraModel cam = CameraModel::centered(30.0, 32, 32);
  std::mt19937_64 rng(seed);
  ego.t = (Eigen::Vector3d(0, 0, 1) + random_vec3(rng, 0.4)).normalized();
  ego.omega = random_vec3(rng, 0.02);
  const InverseDepthMap rho = mfgvo::testing::random_rho(rng, 32, 32, 0.05, 1.0);
  FlowField v = motion_field(ego, rho, cam);
  const auto n = static_cast<std::size_t>(std::round(outlier_fraction * v.size()));
  std::vector<std::size_t> idx(v.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::shuffle(idx.begin(), idx.end(), rng);
  for (std::size_t i = 0; i < n; ++i) v[idx[i]] = {uniform(rng, -0.5, 0.5), uniform(rng, -0.5, 0.5)};
  return robust_egomotion(v, cam);
}

Outcome robust_solver() {
  Outcome o;
  double worst_t = 0.0, worst_w = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    EgoMotion gt;
    const SolveReport r = solve_scene(seed, 0.0, gt);
    worst_t = std::max(worst_t, angle_deg(r.ego.t, gt.t));
    worst_w = std::max(worst_w, (r.ego.omega - gt.omega).norm());
  }
  o.require(worst_t < 0.5, "noiseless t-direction error " + num(worst_t) + " deg");
  o.require(worst_w < 1e-3, "noiseless omega error " + num(worst_w));
  std::vector<double> errs;
  for (std::uint64_t seed = 100; seed < 120; ++seed) {
    EgoMotion gt;
    errs.push_back(angle_deg(solve_scene(seed, 0.1, gt).ego.t, gt.t));
  }
  const double med = median(errs);
  o.require(med < 2.0, "10% outliers median t error " + num(med) + " deg");
  o.note("noiseless max t " + num(worst_t) + " deg, omega " + num(worst_w) +
         "; 10% outliers median t " + num(med) + " deg over 20 seeds");
  return o;
}

Outcome depth_back_substitution() {
  Outcome o;
  const CameraModel cam = CameraModel::centered(30.0, 32, 24);
  std::mt19937_64 rng(1003);
  double worst = 0.0;
  std::size_t checked = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const EgoMotion ego{random_vec3(rng, 1.0), random_vec3(rng, 0.05)};
    const InverseDepthMap rho = mfgvo::testing::random_rho(rng, 32, 24);
    const InverseDepthMap back = depth_from_flow(motion_field(ego, rho, cam), ego, cam);
    for (int r = 0; r < cam.height; ++r) {
      for (int c = 0; c < cam.width; ++c) {
        // Away from the focus of expansion: the translational direction at
        // this pixel must be well defined.
        if ((a_matrix(cam.normalized(r, c)) * ego.t).norm() < 1e-3) continue;
        worst = std::max(worst, std::abs(back(r, c) - rho(r, c)));
        ++checked;
      }
    }
  }
  o.require(worst <= 1e-9, "max rho error " + num(worst));
  o.note("max |rho err| " + num(worst) + " over " + std::to_string(checked) + " pixels");
  return o;
}

gradnet::Tensor random_tensor(std::mt19937_64& rng, gradnet::Shape shape, bool grad = true) {
  std::vector<double> v(gradnet::numel(shape));
  for (auto& x : v) x = uniform(rng, -1.0, 1.0);
  return gradnet::Tensor::from(std::move(shape), std::move(v), grad);
}

gradnet::Tensor project(const gradnet::Tensor& y, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return gradnet::sum(gradnet::mul(y, random_tensor(rng, y.shape(), false)));
}

Outcome gradient_audit() {
  using namespace gradnet;
  using mfgvo::testing::gradcheck;
  Outcome o;
  std::mt19937_64 rng(1004);
  double worst = 0.0;
  int checks = 0;
  auto audit = [&](const std::string& name, std::vector<Tensor> leaves,
                   const std::function<Tensor(const std::vector<Tensor>&)>& f) {
    const auto r = gradcheck(leaves, f);
    worst = std::max(worst, r.worst_relative);
    ++checks;
    o.require(r.ok(), name + " (relative " + num(r.worst_relative) + ")");
  };
  auto dim = [&](int lo, int hi) { return static_cast<int>(uniform(rng, lo, hi + 1 - 1e-9)); };
  for (int trial = 0; trial < 4; ++trial) {
    const std::uint64_t s = 4000 + trial;
    const int C = dim(1, 3), O = dim(1, 3), H = dim(4, 7), W = dim(4, 7);
    const int kh = dim(1, 3), kw = dim(1, 3), sv = dim(1, 2), sh = dim(1, 2), pv = dim(0, 1),
              ph = dim(0, 1);
    const Conv2dGeometry geo{{sv, sh}, {pv, ph}};
    audit("conv2d", {random_tensor(rng, {1, C, H, W}), random_tensor(rng, {O, C, kh, kw}),
                     random_tensor(rng, {O})},
          [&](const auto& p) { return project(conv2d(p[0], p[1], p[2], geo), s); });
    audit("conv2d without bias",
          {random_tensor(rng, {1, C, H, W}), random_tensor(rng, {O, C, kh, kw})},
          [&](const auto& p) { return project(conv2d(p[0], p[1], geo), s); });
    const int n = dim(2, 8), m = dim(1, 5);
    audit("linear", {random_tensor(rng, {n}), random_tensor(rng, {m, n}), random_tensor(rng, {m})},
          [&](const auto& p) { return project(linear(p[0], p[1], p[2]), s); });
    audit("linear without bias", {random_tensor(rng, {n}), random_tensor(rng, {m, n})},
          [&](const auto& p) { return project(linear(p[0], p[1]), s); });
    const Shape sh2{dim(1, 3), dim(2, 4)};
    audit("relu", {random_tensor(rng, sh2)}, [&](const auto& p) { return project(relu(p[0]), s); });
    audit("generalized_logistic", {random_tensor(rng, sh2)},
          [&](const auto& p) { return project(generalized_logistic(p[0]), s); });
    audit("tanh", {random_tensor(rng, sh2)},
          [&](const auto& p) { return project(gradnet::tanh(p[0]), s); });
    audit("scale", {random_tensor(rng, sh2)},
          [&](const auto& p) { return project(scale(p[0], -1.75), s); });
    audit("reshape", {random_tensor(rng, sh2)},
          [&](const auto& p) { return project(reshape(p[0], {static_cast<int>(numel(sh2))}), s); });
    audit("sum", {random_tensor(rng, sh2)}, [&](const auto& p) { return sum(p[0]); });
    audit("max", {random_tensor(rng, sh2)}, [&](const auto& p) { return gradnet::max(p[0]); });
    audit("add", {random_tensor(rng, sh2), random_tensor(rng, sh2)},
          [&](const auto& p) { return project(add(p[0], p[1]), s); });
    audit("sub", {random_tensor(rng, sh2), random_tensor(rng, sh2)},
          [&](const auto& p) { return project(sub(p[0], p[1]), s); });
    audit("mul", {random_tensor(rng, sh2), random_tensor(rng, sh2)},
          [&](const auto& p) { return project(mul(p[0], p[1]), s); });
    audit("l1_distance", {random_tensor(rng, sh2), random_tensor(rng, sh2)},
          [&](const auto& p) { return l1_distance(p[0], p[1]); });
  }

  // Full training loss over every parameter of a small network.
  for (std::uint64_t seed : {1, 2, 3}) {
    MfgConfig c;
    c.width = 6;
    c.height = 4;
    c.focal = 5.0;
    c.hidden = 5;
    c.encoder = {EncoderLayer{3, {2, 2}, {2, 2}, {0, 0}}, EncoderLayer{5, {2, 3}, {1, 1}, {0, 0}}};
    MfgModel model(c, seed);
    const CameraModel cam = model.camera();
    const EgoMotion ego{random_vec3(rng, 1.0), random_vec3(rng, 0.05)};
    const TrainSample sample{motion_field(ego, mfgvo::testing::random_rho(rng, 6, 4), cam), ego};
    const auto r = gradcheck(model.parameters(), [&](const std::vector<Tensor>&) {
      return total_loss_graph(model, sample).first;
    });
    worst = std::max(worst, r.worst_relative);
    ++checks;
    o.require(r.ok(), "full loss seed " + std::to_string(seed));
  }
  o.note(std::to_string(checks) + " checks, worst relative " + num(worst));
  return o;
}

Outcome loss_stack() {
  Outcome o;
  const std::vector<double> zeros(1000, 0.0);
  const double ls = sparsity_loss(zeros);
  o.require(std::abs(ls - 1000.0 / 26.0) <= 1e-9, "L_s(h=0, M=1000) = " + num(ls));

  // Weight table: (|v_t|^2, |v_w|^2) -> (w_t, w_w).
  struct Row {
    Eigen::Vector2d t, w;
    double wt, ww;
  };
  const std::vector<Row> table = {
      {{1, 0}, {1, 0}, 1.0, 1.0},    {{1, 0}, {0, 2}, 4.0, 1.0},
      {{0, 2}, {1, 0}, 1.0, 4.0},    {{3, 4}, {0, 1}, 1.0, 25.0},
      {{0, 0.5}, {3, 0}, 36.0, 1.0}, {{0, 0}, {0, 0}, 1.0, 1.0},
  };
  for (const auto& row : table) {
    FlowField a(1, 1), b(1, 1);
    a[0] = row.t;
    b[0] = row.w;
    const LossWeights w = loss_weights(a, b);
    o.require(std::abs(w.translation - row.wt) <= 1e-12 * row.wt &&
                  std::abs(w.rotation - row.ww) <= 1e-12 * row.ww,
              "weights for |v_t|^2=" + num(row.t.squaredNorm()) +
                  " |v_w|^2=" + num(row.w.squaredNorm()));
  }

  std::mt19937_64 rng(1005);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const int w = 3 + trial % 7, h = 2 + trial % 5;
    const FlowField a = mfgvo::testing::random_field(rng, w, h, 1.0);
    const FlowField b = mfgvo::testing::random_field(rng, w, h, 1.0);
    const FlowField c = mfgvo::testing::random_field(rng, w, h, 1.0);
    const FlowField d = mfgvo::testing::random_field(rng, w, h, 1.0);
    double lt = 0.0, lw = 0.0;
    for (int r = 0; r < h; ++r) {
      for (int col = 0; col < w; ++col) {
        for (int k = 0; k < 2; ++k) {
          lt += std::abs(a(r, col)[k] - c(r, col)[k]);
          lw += std::abs(b(r, col)[k] - d(r, col)[k]);
        }
      }
    }
    const auto got = prediction_losses(a, b, c, d);
    worst = std::max({worst, std::abs(got.translation - lt), std::abs(got.rotation - lw)});
  }
  o.require(worst <= 1e-12, "L1 prediction loss vs naive sum " + num(worst));
  o.note("L_s(0) " + num(ls) + ", " + std::to_string(table.size()) +
         " weight rows, L1 max diff " + num(worst));
  return o;
}

struct DeskRun {
  MfgModel model;
  std::vector<TrainSample> held_out;
  TrainLog log;
  double seconds = 0.0;
};

const DeskRun& desk_run() {
  static const DeskRun run = [] {
    SceneConfig train_cfg;
    train_cfg.seed = 1;
    SceneConfig held_cfg;
    held_cfg.seed = 2;
    DeskRun r{MfgModel(MfgConfig::desk_default(), 1), {}, {}, 0.0};
    std::vector<TrainSample> data;
    for (const auto& s : generate(train_cfg, 200)) data.push_back({s.flow, s.gt});
    for (const auto& s : generate(held_cfg, 50)) r.held_out.push_back({s.flow, s.gt});
    const auto t0 = std::chrono::steady_clock::now();
    r.log = train(r.model, data, 50, 1);
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
  }();
  return run;
}

Outcome desk_learning() {
  Outcome o;
  const DeskRun& run = desk_run();
  const EpochStats& first = run.log.front();
  const EpochStats& last = run.log.back();
  const double rt = last.translation / first.translation;
  const double rw = last.rotation / first.rotation;
  std::vector<double> te, we;
  for (const auto& s : run.held_out) {
    const EgoMotion p = predict_egomotion(run.model, s.flow);
    te.push_back(direction_error(p.t, s.gt.t) * 180.0 / M_PI);
    we.push_back((p.omega - s.gt.omega).norm());
  }
  const double mt = median(te), mw = median(we);
  o.require(rt <= 0.3, "L_t ratio " + num(rt));
  o.require(rw <= 0.3, "L_w ratio " + num(rw));
  o.require(mt < 10.0, "held-out median t error " + num(mt) + " deg");
  o.require(mw < 0.01, "held-out median omega error " + num(mw));
  o.require(run.seconds < 900.0, "runtime " + num(run.seconds) + " s");
  o.note("L_t " + num(first.translation) + " -> " + num(last.translation) + " (" + num(rt) +
         "x), L_w " + num(first.rotation) + " -> " + num(last.rotation) + " (" + num(rw) +
         "x), held-out t " + num(mt) + " deg, omega " + num(mw) + ", train " +
         num(run.seconds) + " s");
  return o;
}

Outcome sparsity_degradation() {
  Outcome o;
  const DeskRun& run = desk_run();
  const auto rows = sparsity_sweep(run.model, run.held_out, {100, 50, 25, 10, 5, 2, 1});
  std::map<double, double> err;
  std::string line = "field error";
  for (const auto& r : rows) {
    err[r.k] = r.value;
    line += " k=" + num(r.k) + ":" + num(r.value);
  }
  o.require(rows.size() == 7, "sweep size");
  o.require(std::abs(err[50] - err[100]) <= 0.05 * err[100], "k=50 vs k=100");
  o.require(err[1] >= err[100] - 1e-9, "k=1 below k=100");
  o.note(line);
  return o;
}

Outcome object_extraction() {
  Outcome o;
  ObjMotionParams params;
  params.theta_d = 1.5;
  params.theta_p = 0.5;
  params.depth_gate = 0.2;

  // Constructed scene: static background under ego-motion, one box moving
  // laterally. Fields are the GT translational and rotational fields.
  const CameraModel cam = CameraModel::centered(28.0, 48, 16);
  const EgoMotion ego{{0.05, 0.0, 1.0}, {0.0, 0.01, 0.0}};
  InverseDepthMap rho(48, 16);
  for (int r = 0; r < 16; ++r) {
    for (int c = 0; c < 48; ++c) rho(r, c) = 1.0 / (30.0 + 0.3 * c);  // far background
  }
  Mask gt_mask(48, 16, 0);
  const Eigen::Vector2d box_flow(0.6 / 5.0, 0.0);  // lateral speed / depth
  for (int r = 5; r < 11; ++r) {
    for (int c = 20; c < 28; ++c) {
      rho(r, c) = 1.0 / 5.0;
      gt_mask(r, c) = 1;
    }
  }
  FlowField flow = motion_field(ego, rho, cam);
  for (std::size_t i = 0; i < flow.size(); ++i) {
    if (gt_mask[i]) flow[i] += box_flow;
  }
  const FlowField vt = translational_field(ego.t, cam), vw = rotational_field(ego.omega, cam);
  const ObjectResult res = extract_object_motion(flow, vt, vw, rho, params);
  int inter = 0, uni = 0, n = 0;
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  for (std::size_t i = 0; i < res.mask.size(); ++i) {
    inter += res.mask[i] && gt_mask[i];
    uni += res.mask[i] || gt_mask[i];
    if (res.mask[i]) {
      mean += res.velocity[i];
      ++n;
    }
  }
  const double iou = uni ? static_cast<double>(inter) / uni : 0.0;
  if (n) mean /= n;
  const double rel = n ? (mean - box_flow).norm() / box_flow.norm() : INFINITY;
  o.require(iou >= 0.5, "IoU " + num(iou));
  o.require(rel <= 0.2, "mean velocity relative error " + num(rel));

  // Generated one-box scenes.
  SceneConfig cfg;
  cfg.min_objects = 1;
  cfg.max_objects = 1;
  cfg.seed = 1008;
  const CameraModel gcam = cfg.camera();
  int scenes = 0, scene_pass = 0;
  for (const auto& s : generate(cfg, 20)) {
    int area = 0;
    Eigen::Vector2d gt = Eigen::Vector2d::Zero();
    for (std::size_t i = 0; i < s.object_mask.size(); ++i) {
      if (s.object_mask[i]) {
        ++area;
        gt = s.object_flow[i];
      }
    }
    if (area == 0 || gt.norm() < 0.02) continue;  // occluded or nearly static
    ++scenes;
    const ObjectResult r = extract_object_motion(
        s.flow, translational_field(s.gt.t, gcam), rotational_field(s.gt.omega, gcam), s.rho,
        params);
    int in = 0, un = 0, cnt = 0;
    Eigen::Vector2d m = Eigen::Vector2d::Zero();
    for (std::size_t i = 0; i < r.mask.size(); ++i) {
      in += r.mask[i] && s.object_mask[i];
      un += r.mask[i] || s.object_mask[i];
      if (r.mask[i]) {
        m += r.velocity[i];
        ++cnt;
      }
    }
    if (cnt) m /= cnt;
    if (un && static_cast<double>(in) / un >= 0.5 && cnt && (m - gt).norm() <= 0.2 * gt.norm()) {
      ++scene_pass;
    }
  }
  o.require(scenes >= 5 && scene_pass == scenes,
            "generated scenes " + std::to_string(scene_pass) + "/" + std::to_string(scenes));

  // Zero residual: flow exactly explained by the ego-motion.
  const ObjectResult zero = extract_object_motion(motion_field(ego, rho, cam), vt, vw, rho, params);
  int set = 0;
  for (std::size_t i = 0; i < zero.mask.size(); ++i) set += zero.mask[i];
  o.require(set == 0, "zero-residual scene has " + std::to_string(set) + " mask pixels");
  o.note("constructed IoU " + num(iou) + ", velocity error " + num(100 * rel) + "%; generated " +
         std::to_string(scene_pass) + "/" + std::to_string(scenes) + "; zero-residual mask empty");
  return o;
}

double naive_snippet_ate(const Trajectory& pred, const Trajectory& gt, std::size_t start,
                         std::size_t len) {
  double num_ = 0, den = 0;
  for (std::size_t i = 0; i < len; ++i) {
    for (int k = 0; k < 3; ++k) {
      const double p = pred[start + i].translation[k] - pred[start].translation[k];
      const double g = gt[start + i].translation[k] - gt[start].translation[k];
      num_ += p * g;
      den += p * p;
    }
  }
  double s = den > 0 ? num_ / den : 0.0;
  if (s < 0) s = 0;
  double sq = 0;
  for (std::size_t i = 0; i < len; ++i) {
    for (int k = 0; k < 3; ++k) {
      const double p = pred[start + i].translation[k] - pred[start].translation[k];
      const double g = gt[start + i].translation[k] - gt[start].translation[k];
      sq += (s * p - g) * (s * p - g);
    }
  }
  return std::sqrt(sq / len);
}

Outcome metrics() {
  Outcome o;
  std::mt19937_64 rng(1009);
  auto traj = [&](int n) {
    std::vector<EgoMotion> m;
    for (int i = 0; i + 1 < n; ++i) {
      m.push_back({random_vec3(rng, 1.0) + Eigen::Vector3d(0, 0, 1), random_vec3(rng, 0.05)});
    }
    return integrate_trajectory(m);
  };
  const Trajectory gt = traj(20);
  const MetricReport same = ate(gt, gt);
  o.require(same.mean == 0.0, "ATE(gt, gt) = " + num(same.mean));
  Trajectory doubled = gt;
  for (auto& p : doubled) p.translation *= 2.0;
  const double scaled = ate(doubled, gt).mean;
  o.require(scaled <= 1e-12, "ATE(2 gt, gt) = " + num(scaled));

  double worst_ate = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const Trajectory a = traj(12), b = traj(12);
    const MetricReport r = ate(a, b);
    for (std::size_t s = 0; s < r.values.size(); ++s) {
      worst_ate = std::max(worst_ate, std::abs(r.values[s] - naive_snippet_ate(a, b, s, 5)));
    }
  }
  o.require(worst_ate <= 1e-12, "ATE vs naive oracle " + num(worst_ate));

  std::vector<EgoMotion> gm, yawed;
  for (int i = 0; i < 10; ++i) gm.push_back({random_vec3(rng, 1.0), random_vec3(rng, 0.05)});
  for (const auto& m : gm) yawed.push_back({m.t, so3_log(so3_exp({0, 0.01, 0}) * so3_exp(m.omega))});
  const RpeReport y = rpe(yawed, gm);
  double worst_yaw = 0.0;
  for (double v : y.rotation.values) worst_yaw = std::max(worst_yaw, std::abs(v - 0.01));
  o.require(worst_yaw <= 1e-12, "RPE injected yaw error " + num(worst_yaw));

  double worst_rpe_t = 0.0;
  std::vector<EgoMotion> pm;
  for (int i = 0; i < 10; ++i) pm.push_back({random_vec3(rng, 1.0), random_vec3(rng, 0.05)});
  const RpeReport r = rpe(pm, gm);
  for (int i = 0; i < 10; ++i) {
    const Eigen::Vector3d d = pm[i].t - gm[i].t;
    const double naive = std::sqrt(d.x() * d.x() + d.y() * d.y() + d.z() * d.z());
    worst_rpe_t = std::max(worst_rpe_t, std::abs(r.translation.values[i] - naive));
  }
  o.require(worst_rpe_t <= 1e-12, "RPE translation vs naive " + num(worst_rpe_t));
  o.note("ATE(gt,gt) 0, ATE(2x) " + num(scaled) + ", ATE oracle " + num(worst_ate) +
         ", yaw " + num(worst_yaw) + ", RPE t oracle " + num(worst_rpe_t));
  return o;
}

Outcome formats() {
  Outcome o;
  std::mt19937_64 rng(1010);

  const FlowField f = mfgvo::testing::random_field(rng, 48, 16, 5.0);
  std::stringstream fs_;
  write_flow(fs_, f);
  const FlowField fb = read_flow(fs_);
  bool flow_ok = fb.same_shape(48, 16);
  for (std::size_t i = 0; flow_ok && i < f.size(); ++i) {
    flow_ok = fb[i].x() == static_cast<double>(static_cast<float>(f[i].x())) &&
              fb[i].y() == static_cast<double>(static_cast<float>(f[i].y()));
  }
  o.require(flow_ok, "flow float32 round trip");

  const InverseDepthMap rho = mfgvo::testing::random_rho(rng, 48, 16);
  std::stringstream ds;
  write_depth(ds, rho);
  const Grid<double> rb = read_depth(ds);
  bool depth_ok = rb.size() == rho.size();
  for (std::size_t i = 0; depth_ok && i < rho.size(); ++i) {
    depth_ok = rb[i] == static_cast<double>(static_cast<float>(rho[i]));
  }
  o.require(depth_ok, "depth float32 round trip");

  Mask m(48, 16, 0);
  for (auto& v : m) v = uniform(rng, 0, 1) < 0.3 ? 1 : 0;
  std::stringstream ms;
  write_mask(ms, m);
  o.require(read_mask(ms) == m, "mask round trip");

  Trajectory traj;
  for (int i = 0; i < 30; ++i) traj.push_back(mfgvo::testing::random_pose(rng));
  std::stringstream ps;
  write_pose_file(ps, traj);
  const Trajectory tb = read_pose_file(ps);
  double pose_err = tb.size() == traj.size() ? 0.0 : INFINITY;
  for (std::size_t i = 0; i < std::min(tb.size(), traj.size()); ++i) {
    pose_err = std::max({pose_err, (tb[i].R - traj[i].R).cwiseAbs().maxCoeff(),
                         (tb[i].translation - traj[i].translation).cwiseAbs().maxCoeff()});
  }
  o.require(pose_err <= 1e-12, "pose round trip " + num(pose_err));

  const MfgModel model(MfgConfig::make(8, 8, 6), 3);
  std::stringstream cs;
  gradnet::write_checkpoint(cs, model.to_checkpoint());
  const auto entries = model.to_checkpoint();
  const auto back = gradnet::read_checkpoint(cs);
  bool ckpt_ok = back.size() == entries.size();
  for (std::size_t k = 0; ckpt_ok && k < entries.size(); ++k) {
    ckpt_ok = back[k].name == entries[k].name && back[k].shape == entries[k].shape &&
              back[k].values.size() == entries[k].values.size() &&
              std::memcmp(back[k].values.data(), entries[k].values.data(),
                          entries[k].values.size() * sizeof(double)) == 0;
  }
  o.require(ckpt_ok, "checkpoint bit-exact round trip");

  // Malformed inputs through the CLI.
  Sandbox sb("formats");
  write_flow(sb.path("ok.flo"), FlowField(48, 16));
  std::string bad_flow = slurp(sb.path("ok.flo"));
  bad_flow[0] = 'X';
  sb.write("bad_magic.flo", bad_flow);
  sb.write("short.flo", slurp(sb.path("ok.flo")).substr(0, 40));
  gradnet::save_checkpoint(sb.path("ok.ckpt"), MfgModel(MfgConfig::desk_default(), 1).to_checkpoint());
  const std::string ck = slurp(sb.path("ok.ckpt"));
  sb.write("short.ckpt", ck.substr(0, ck.size() / 2));
  sb.write("bad.dep", "DEP1");
  sb.write("bad_pose.txt", "1 0 0 0 0 1 0 0 0 0 1 x\n");
  sb.write("bad.cfg", "width=abc\n");
  struct Case {
    std::string args;
    int code;
  };
  const std::vector<Case> cases = {
      {"solve --flow " + q(sb.path("bad_magic.flo")), 2},
      {"solve --flow " + q(sb.path("short.flo")), 2},
      {"solve --flow " + q(sb.path("absent.flo")), 2},
      {"predict --checkpoint " + q(sb.path("short.ckpt")) + " --flow " + q(sb.path("ok.flo")), 2},
      {"--out-dir " + q(sb.path("x")) + " extract --checkpoint " + q(sb.path("ok.ckpt")) +
           " --flow " + q(sb.path("ok.flo")) + " --depth " + q(sb.path("bad.dep")),
       2},
      {"viz --trajectory " + q(sb.path("bad_pose.txt")) + " --out " + q(sb.path("p.ppm")), 2},
      {"--out-dir " + q(sb.path("g")) + " generate --config " + q(sb.path("bad.cfg")), 2},
      {"solve --flow " + q(sb.path("ok.flo")) + " --bogus", 1},
      {"predict --checkpoint " + q(sb.path("ok.ckpt")) + " --flow " + q(sb.path("ok.flo")) +
           " --topk 101",
       1},
      {"eval", 1},
  };
  int cli_ok = 0;
  for (const auto& c : cases) {
    const int got = sb.run(c.args).code;
    if (got == c.code) {
      ++cli_ok;
    } else {
      o.require(false, "exit " + std::to_string(got) + " != " + std::to_string(c.code) + " for `" +
                           c.args.substr(0, c.args.find(' ')) + "`");
    }
  }
  o.note("flow/depth exact at float32, mask/checkpoint exact, pose " + num(pose_err) +
         "; CLI exit codes " + std::to_string(cli_ok) + "/" + std::to_string(cases.size()));
  return o;
}

Outcome determinism() {
  Outcome o;
  Sandbox sb("determinism");
  sb.write("model.cfg", "hidden=16\n");
  std::vector<std::map<std::string, std::string>> snaps;
  std::vector<std::string> outs;
  for (int rep = 0; rep < 2; ++rep) {
    const std::string d = sb.path("r" + std::to_string(rep));
    const std::vector<std::string> cmds = {
        "--seed 7 --out-dir " + q(d + "/data") + " generate --count 8 --sequence",
        "--seed 7 --out-dir " + q(d + "/iid") + " generate --count 4",
        "--seed 7 --out-dir " + q(d + "/run") + " train --dataset " + q(d + "/data/manifest.txt") +
            " --epochs 2 --config " + q(sb.path("model.cfg")),
        "--seed 7 predict --checkpoint " + q(d + "/run/model.ckpt") + " --flow " +
            q(d + "/data/frames/000001.flo") + " --topk 25 --fields-out " + q(d + "/fields"),
        "--seed 7 solve --robust --flow " + q(d + "/data/frames/000001.flo"),
        "--seed 7 solve --flow " + q(d + "/data/frames/000002.flo"),
        "--seed 7 --out-dir " + q(d + "/obj") + " extract --checkpoint " +
            q(d + "/run/model.ckpt") + " --flow " + q(d + "/data/frames/000001.flo") +
            " --depth " + q(d + "/data/frames/000001.dep"),
        "--seed 7 --out-dir " + q(d + "/ate") + " eval --checkpoint " + q(d + "/run/model.ckpt") +
            " --dataset " + q(d + "/data/manifest.txt") + " --metric ate",
        "--seed 7 --out-dir " + q(d + "/rpe") + " eval --dataset " +
            q(d + "/data/manifest.txt") + " --metric rpe --predictor robust",
        "--seed 7 --out-dir " + q(d + "/sweep") + " eval --checkpoint " +
            q(d + "/run/model.ckpt") + " --dataset " + q(d + "/data/manifest.txt") +
            " --sparsity-sweep 100,50,10,1",
        "--seed 7 viz --flow " + q(d + "/data/frames/000003.flo") + " --out " + q(d + "/flow.ppm"),
        "--seed 7 viz --trajectory " + q(d + "/data/poses.txt") + " --label gt --out " +
            q(d + "/traj.ppm"),
    };
    std::string transcript;
    for (const auto& c : cmds) {
      const Run r = sb.run(c);
      o.require(r.code == 0, "exit " + std::to_string(r.code) + " for `" + c.substr(0, 60) + "`");
      // Paths differ between the two runs; compare output with them removed.
      std::string out = r.out;
      for (std::size_t p; (p = out.find(d)) != std::string::npos;) out.erase(p, d.size());
      transcript += out;
    }
    outs.push_back(transcript);
    snaps.push_back(sb.snapshot("r" + std::to_string(rep)));
  }
  std::size_t differing = 0;
  for (const auto& [name, bytes] : snaps[0]) {
    const auto it = snaps[1].find(name);
    if (it == snaps[1].end() || it->second != bytes) {
      ++differing;
      o.require(false, "artifact differs: " + name);
    }
  }
  o.require(snaps[0].size() == snaps[1].size(), "artifact sets differ");
  o.require(outs[0] == outs[1], "stdout differs");
  o.note(std::to_string(snaps[0].size()) + " artifacts and stdout of 12 invocations compared");
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    Outcome (*check)();
  };
  const Criterion criteria[] = {
      {"geometry round trip", geometry_round_trip},
      {"robust solver", robust_solver},
      {"depth back-substitution", depth_back_substitution},
      {"gradient audit", gradient_audit},
      {"loss-stack unit values", loss_stack},
      {"desk-scale learning", desk_learning},
      {"sparsity degradation", sparsity_degradation},
      {"object extraction", object_extraction},
      {"metrics", metrics},
      {"formats", formats},
      {"determinism", determinism},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!o.pass) ++failed;
    std::printf("%s %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str(), s);
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(std::size(criteria)) - failed,
              std::size(criteria));
  return failed == 0 ? 0 : 1;
}
