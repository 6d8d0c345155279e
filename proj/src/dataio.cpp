#include "mfgvo/dataio.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "binary_io.hpp"
#include "mfgvo/format.hpp"

namespace mfgvo {

namespace {

constexpr std::uint64_t kMaxPixels = std::uint64_t{1} << 28;

template <typename Stream>
Stream open_file(const std::string& path, std::ios::openmode mode) {
  Stream s(path, mode);
  if (!s) {
    if constexpr (std::is_same_v<Stream, std::ifstream>) {
      throw FormatError("cannot open '" + path + "' for reading");
    } else {
      throw std::runtime_error("cannot open '" + path + "' for writing");
    }
  }
  return s;
}

void write_header(std::ostream& out, const char (&magic)[5], int w, int h) {
  out.write(magic, 4);
  detail::put_u32(out, static_cast<std::uint32_t>(w));
  detail::put_u32(out, static_cast<std::uint32_t>(h));
}

std::pair<int, int> read_header(std::istream& in, const char (&magic)[5],
                                const char* what) {
  detail::expect_magic(in, magic, what);
  const std::uint32_t w = detail::get_u32(in, what);
  const std::uint32_t h = detail::get_u32(in, what);
  if (w == 0 || h == 0) throw FormatError(std::string(what) + ": zero dimension");
  if (static_cast<std::uint64_t>(w) * h > kMaxPixels) {
    throw FormatError(std::string(what) + ": dimensions too large");
  }
  return {static_cast<int>(w), static_cast<int>(h)};
}

float finite_f32(std::istream& in, const char* what) {
  const float v = detail::get_f32(in, what);
  if (!std::isfinite(v)) throw FormatError(std::string(what) + ": non-finite value");
  return v;
}

void finish_write(std::ostream& out, const char* what) {
  if (!out) throw std::runtime_error(std::string(what) + ": write failed");
}

}  // namespace

void write_flow(std::ostream& out, const FlowField& field) {
  if (field.width() < 1 || field.height() < 1) {
    throw DimensionError("write_flow: empty field");
  }
  write_header(out, "FLO1", field.width(), field.height());
  for (const auto& v : field) {
    detail::put_f32(out, static_cast<float>(v.x()));
    detail::put_f32(out, static_cast<float>(v.y()));
  }
  finish_write(out, "write_flow");
}

FlowField read_flow(std::istream& in) {
  constexpr const char* what = "flow file";
  const auto [w, h] = read_header(in, "FLO1", what);
  FlowField field(w, h);
  for (auto& v : field) {
    const double u = finite_f32(in, what);
    const double vv = finite_f32(in, what);
    v = {u, vv};
  }
  detail::expect_eof(in, what);
  return field;
}

void write_depth(std::ostream& out, const Grid<double>& depth) {
  if (depth.width() < 1 || depth.height() < 1) {
    throw DimensionError("write_depth: empty raster");
  }
  write_header(out, "DEP1", depth.width(), depth.height());
  for (double d : depth) detail::put_f32(out, static_cast<float>(d));
  finish_write(out, "write_depth");
}

Grid<double> read_depth(std::istream& in) {
  constexpr const char* what = "depth file";
  const auto [w, h] = read_header(in, "DEP1", what);
  Grid<double> depth(w, h);
  for (double& d : depth) d = finite_f32(in, what);
  detail::expect_eof(in, what);
  return depth;
}

void write_mask(std::ostream& out, const Mask& mask) {
  if (mask.width() < 1 || mask.height() < 1) {
    throw DimensionError("write_mask: empty mask");
  }
  write_header(out, "MSK1", mask.width(), mask.height());
  for (std::uint8_t m : mask) {
    const char b = m ? 1 : 0;
    out.write(&b, 1);
  }
  finish_write(out, "write_mask");
}

Mask read_mask(std::istream& in) {
  constexpr const char* what = "mask file";
  const auto [w, h] = read_header(in, "MSK1", what);
  Mask mask(w, h);
  std::vector<std::uint8_t> bytes(mask.size());
  detail::get_bytes(in, bytes.data(), bytes.size(), what);
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    if (bytes[i] > 1) {
      throw FormatError("mask file: byte " + std::to_string(i) + " is " +
                        std::to_string(bytes[i]) + ", expected 0 or 1");
    }
    mask[i] = bytes[i];
  }
  detail::expect_eof(in, what);
  return mask;
}

void write_flow(const std::string& path, const FlowField& field) {
  auto out = open_file<std::ofstream>(path, std::ios::binary);
  write_flow(out, field);
}
FlowField read_flow(const std::string& path) {
  auto in = open_file<std::ifstream>(path, std::ios::binary);
  return read_flow(in);
}
void write_depth(const std::string& path, const Grid<double>& depth) {
  auto out = open_file<std::ofstream>(path, std::ios::binary);
  write_depth(out, depth);
}
Grid<double> read_depth(const std::string& path) {
  auto in = open_file<std::ifstream>(path, std::ios::binary);
  return read_depth(in);
}
void write_mask(const std::string& path, const Mask& mask) {
  auto out = open_file<std::ofstream>(path, std::ios::binary);
  write_mask(out, mask);
}
Mask read_mask(const std::string& path) {
  auto in = open_file<std::ifstream>(path, std::ios::binary);
  return read_mask(in);
}

namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> tokens;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) tokens.push_back(line.substr(start, i - start));
  }
  return tokens;
}

double parse_number(std::string_view tok, const std::string& context) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size() || !std::isfinite(v)) {
    throw FormatError(context + ": '" + std::string(tok) + "' is not a number");
  }
  return v;
}

int parse_int(std::string_view tok, const std::string& context) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw FormatError(context + ": '" + std::string(tok) + "' is not an integer");
  }
  return v;
}

}  // namespace

Trajectory read_pose_file(std::istream& in) {
  Trajectory poses;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto tokens = split_ws(line);
    if (tokens.empty()) continue;
    const std::string ctx = "pose file line " + std::to_string(line_no);
    if (tokens.size() != 12) {
      throw FormatError(ctx + ": expected 12 numbers, found " +
                        std::to_string(tokens.size()));
    }
    double v[12];
    for (int k = 0; k < 12; ++k) v[k] = parse_number(tokens[k], ctx);
    Eigen::Matrix3d R;
    R << v[0], v[1], v[2], v[4], v[5], v[6], v[8], v[9], v[10];
    if (!is_rotation(R, 1e-3)) throw FormatError(ctx + ": rotation is not orthonormal");
    poses.push_back({orthonormalize(R), Eigen::Vector3d(v[3], v[7], v[11])});
  }
  return poses;
}

Trajectory read_pose_file(const std::string& path) {
  auto in = open_file<std::ifstream>(path, std::ios::in);
  return read_pose_file(in);
}

void write_pose_file(std::ostream& out, const Trajectory& poses) {
  for (const auto& p : poses) {
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) out << fmt17(p.R(r, c)) << ' ';
      out << fmt17(p.translation(r)) << (r == 2 ? '\n' : ' ');
    }
  }
  finish_write(out, "write_pose_file");
}

void write_pose_file(const std::string& path, const Trajectory& poses) {
  auto out = open_file<std::ofstream>(path, std::ios::out);
  write_pose_file(out, poses);
}

namespace {

void require_camera_shape(const FlowField& f, const CameraModel& cam, const char* what) {
  if (!f.same_shape(cam.width, cam.height)) {
    throw DimensionError(std::string(what) + ": field does not match camera");
  }
}

}  // namespace

FlowField pixels_to_normalized(const FlowField& pixels, const CameraModel& cam) {
  require_camera_shape(pixels, cam, "pixels_to_normalized");
  FlowField out(pixels.width(), pixels.height());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = pixels[i] / cam.f;
  return out;
}

FlowField normalized_to_pixels(const FlowField& normalized, const CameraModel& cam) {
  require_camera_shape(normalized, cam, "normalized_to_pixels");
  FlowField out(normalized.width(), normalized.height());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = normalized[i] * cam.f;
  return out;
}

void write_manifest(std::ostream& out, const Manifest& m) {
  out << "mfgvo-manifest 1\n";
  out << "camera " << fmt17(m.camera.f) << ' ' << fmt17(m.camera.cx) << ' '
      << fmt17(m.camera.cy) << ' ' << m.camera.width << ' ' << m.camera.height << '\n';
  out << "sequence " << (m.sequence ? 1 : 0) << '\n';
  for (const auto& r : m.records) {
    out << r.id << ' ' << r.flow_path << ' ' << r.depth_path << ' ' << r.mask_path;
    for (int k = 0; k < 3; ++k) out << ' ' << fmt17(r.gt.t(k));
    for (int k = 0; k < 3; ++k) out << ' ' << fmt17(r.gt.omega(k));
    out << '\n';
  }
  finish_write(out, "write_manifest");
}

Manifest read_manifest(std::istream& in) {
  Manifest m;
  std::string line;
  int line_no = 0;
  auto next_tokens = [&](std::vector<std::string_view>& tokens) {
    while (std::getline(in, line)) {
      ++line_no;
      tokens = split_ws(line);
      if (!tokens.empty()) return true;
    }
    return false;
  };
  auto ctx = [&] { return "manifest line " + std::to_string(line_no); };

  std::vector<std::string_view> tok;
  if (!next_tokens(tok) || tok.size() != 2 || tok[0] != "mfgvo-manifest" || tok[1] != "1") {
    throw FormatError("manifest: missing 'mfgvo-manifest 1' header");
  }
  if (!next_tokens(tok) || tok.size() != 6 || tok[0] != "camera") {
    throw FormatError(ctx() + ": expected 'camera f cx cy width height'");
  }
  try {
    m.camera = CameraModel(parse_number(tok[1], ctx()), parse_number(tok[2], ctx()),
                           parse_number(tok[3], ctx()), parse_int(tok[4], ctx()),
                           parse_int(tok[5], ctx()));
  } catch (const std::invalid_argument& e) {
    throw FormatError(ctx() + ": " + e.what());
  }
  if (!next_tokens(tok) || tok.size() != 2 || tok[0] != "sequence" ||
      (tok[1] != "0" && tok[1] != "1")) {
    throw FormatError(ctx() + ": expected 'sequence 0|1'");
  }
  m.sequence = tok[1] == "1";
  while (next_tokens(tok)) {
    if (tok.size() != 10) {
      throw FormatError(ctx() + ": expected 10 fields, found " + std::to_string(tok.size()));
    }
    ManifestRecord r;
    r.id = tok[0];
    r.flow_path = tok[1];
    r.depth_path = tok[2];
    r.mask_path = tok[3];
    for (int k = 0; k < 3; ++k) r.gt.t(k) = parse_number(tok[4 + k], ctx());
    for (int k = 0; k < 3; ++k) r.gt.omega(k) = parse_number(tok[7 + k], ctx());
    m.records.push_back(std::move(r));
  }
  return m;
}

void write_manifest(const std::string& path, const Manifest& manifest) {
  auto out = open_file<std::ofstream>(path, std::ios::out);
  write_manifest(out, manifest);
}

Manifest read_manifest(const std::string& path) {
  auto in = open_file<std::ifstream>(path, std::ios::in);
  return read_manifest(in);
}

}  // namespace mfgvo
