#include "mfgvo/flowviz.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

namespace mfgvo {

RgbImage::RgbImage(int w, int h, Rgb fill) : width(w), height(h) {
  if (w < 0 || h < 0) throw DimensionError("image extents must be non-negative");
  pixels.resize(static_cast<std::size_t>(w) * h * 3);
  for (std::size_t i = 0; i < pixels.size(); i += 3) {
    pixels[i] = fill[0];
    pixels[i + 1] = fill[1];
    pixels[i + 2] = fill[2];
  }
}

Rgb RgbImage::at(int row, int col) const {
  const std::size_t i = (static_cast<std::size_t>(row) * width + col) * 3;
  return {pixels[i], pixels[i + 1], pixels[i + 2]};
}

void RgbImage::set(int row, int col, Rgb c) {
  const std::size_t i = (static_cast<std::size_t>(row) * width + col) * 3;
  pixels[i] = c[0];
  pixels[i + 1] = c[1];
  pixels[i + 2] = c[2];
}

const std::array<std::array<double, 3>, kWheelBins>& color_wheel() {
  static const auto wheel = [] {
    std::array<std::array<double, 3>, kWheelBins> w{};
    const auto [RY, YG, GC, CB, BM, MR] = kWheelSegments;
    int k = 0;
    auto ramp = [](int i, int n) { return std::floor(255.0 * i / n); };
    for (int i = 0; i < RY; ++i) w[k++] = {255, ramp(i, RY), 0};
    for (int i = 0; i < YG; ++i) w[k++] = {255 - ramp(i, YG), 255, 0};
    for (int i = 0; i < GC; ++i) w[k++] = {0, 255, ramp(i, GC)};
    for (int i = 0; i < CB; ++i) w[k++] = {0, 255 - ramp(i, CB), 255};
    for (int i = 0; i < BM; ++i) w[k++] = {ramp(i, BM), 0, 255};
    for (int i = 0; i < MR; ++i) w[k++] = {255, 0, 255 - ramp(i, MR)};
    return w;
  }();
  return wheel;
}

double wheel_position(double u, double v) {
  const double a = std::atan2(-v, -u) / M_PI;  // (-1, 1]
  double pos = (a + 1.0) / 2.0 * kWheelBins;
  if (pos >= kWheelBins) pos -= kWheelBins;
  return pos;
}

std::array<double, 3> wheel_color(double position) {
  double p = std::fmod(position, static_cast<double>(kWheelBins));
  if (p < 0) p += kWheelBins;
  const int k0 = static_cast<int>(std::floor(p)) % kWheelBins;
  const int k1 = (k0 + 1) % kWheelBins;
  const double f = p - std::floor(p);
  const auto& w = color_wheel();
  std::array<double, 3> c{};
  for (int ch = 0; ch < 3; ++ch) {
    c[ch] = ((1.0 - f) * w[k0][ch] + f * w[k1][ch]) / 255.0;
  }
  return c;
}

RgbImage flow_to_image(const FlowField& field, std::optional<double> max_magnitude) {
  RgbImage img(field.width(), field.height());
  double max_mag = 0.0;
  if (max_magnitude) {
    max_mag = *max_magnitude;
  } else {
    for (const auto& v : field) max_mag = std::max(max_mag, v.norm());
  }
  if (!(max_mag > 0.0)) return img;
  for (int r = 0; r < field.height(); ++r) {
    for (int c = 0; c < field.width(); ++c) {
      const Eigen::Vector2d v = field(r, c) / max_mag;
      const double rad = v.norm();
      auto col = wheel_color(wheel_position(v.x(), v.y()));
      Rgb px{};
      for (int ch = 0; ch < 3; ++ch) {
        double x = col[ch];
        x = rad <= 1.0 ? 1.0 - rad * (1.0 - x) : x * 0.75;
        px[ch] = static_cast<std::uint8_t>(std::floor(255.0 * std::clamp(x, 0.0, 1.0)));
      }
      img.set(r, c, px);
    }
  }
  return img;
}

RgbImage mask_to_image(const Mask& mask) {
  RgbImage img(mask.width(), mask.height());
  for (int r = 0; r < mask.height(); ++r) {
    for (int c = 0; c < mask.width(); ++c) {
      if (mask(r, c)) img.set(r, c, {0, 0, 0});
    }
  }
  return img;
}

namespace {

const std::array<Rgb, 8> kPalette = {{{31, 119, 180},
                                      {255, 127, 14},
                                      {44, 160, 44},
                                      {214, 39, 40},
                                      {148, 103, 189},
                                      {140, 86, 75},
                                      {227, 119, 194},
                                      {127, 127, 127}}};

void plot_pixel(RgbImage& img, int r, int c, Rgb color) {
  if (r >= 0 && r < img.height && c >= 0 && c < img.width) img.set(r, c, color);
}

void draw_line(RgbImage& img, int r0, int c0, int r1, int c1, Rgb color) {
  const int dc = std::abs(c1 - c0), dr = -std::abs(r1 - r0);
  const int sc = c0 < c1 ? 1 : -1, sr = r0 < r1 ? 1 : -1;
  int err = dc + dr;
  while (true) {
    plot_pixel(img, r0, c0, color);
    if (r0 == r1 && c0 == c1) break;
    const int e2 = 2 * err;
    if (e2 >= dr) {
      err += dr;
      c0 += sc;
    }
    if (e2 <= dc) {
      err += dc;
      r0 += sr;
    }
  }
}

void draw_marker(RgbImage& img, int r, int c, Rgb color) {
  for (int dr = -2; dr <= 2; ++dr) {
    for (int dc = -2; dc <= 2; ++dc) plot_pixel(img, r + dr, c + dc, color);
  }
}

}  // namespace

TrajectoryPlot trajectory_plot(const std::vector<Trajectory>& trajs,
                               const std::vector<std::string>& labels,
                               const TrajectoryPlotOptions& opts) {
  if (trajs.empty()) throw std::invalid_argument("trajectory_plot: no trajectories");
  if (!labels.empty() && labels.size() != trajs.size()) {
    throw std::invalid_argument("trajectory_plot: labels and trajectories differ in count");
  }
  if (opts.width < 16 || opts.height < 16) {
    throw std::invalid_argument("trajectory_plot: image must be at least 16x16");
  }
  double x0 = INFINITY, x1 = -INFINITY, z0 = INFINITY, z1 = -INFINITY;
  for (const auto& t : trajs) {
    for (const auto& p : t) {
      x0 = std::min(x0, p.translation.x());
      x1 = std::max(x1, p.translation.x());
      z0 = std::min(z0, p.translation.z());
      z1 = std::max(z1, p.translation.z());
    }
  }
  TrajectoryPlot plot;
  plot.image = RgbImage(opts.width, opts.height);
  if (!std::isfinite(x0)) return plot;  // every trajectory empty

  // A degenerate axis gets a unit span so the data sits in the middle.
  auto widen = [&](double& lo, double& hi) {
    double span = hi - lo;
    if (span <= 0.0) {
      lo -= 0.5;
      hi += 0.5;
      span = 1.0;
    }
    lo -= opts.margin * span;
    hi += opts.margin * span;
  };
  widen(x0, x1);
  widen(z0, z1);
  plot.x_min = x0;
  plot.x_max = x1;
  plot.z_min = z0;
  plot.z_max = z1;

  auto to_px = [&](const Eigen::Vector3d& p) {
    const int c = static_cast<int>(std::lround((p.x() - x0) / (x1 - x0) * (opts.width - 1)));
    const int r = static_cast<int>(std::lround((z1 - p.z()) / (z1 - z0) * (opts.height - 1)));
    return std::pair{r, c};
  };
  for (std::size_t k = 0; k < trajs.size(); ++k) {
    const Rgb color = kPalette[k % kPalette.size()];
    plot.colors.push_back(color);
    const auto& t = trajs[k];
    for (std::size_t i = 0; i + 1 < t.size(); ++i) {
      const auto [ra, ca] = to_px(t[i].translation);
      const auto [rb, cb] = to_px(t[i + 1].translation);
      draw_line(plot.image, ra, ca, rb, cb, color);
    }
    for (const auto& p : t) {
      const auto [r, c] = to_px(p.translation);
      draw_marker(plot.image, r, c, color);
    }
  }
  if (!labels.empty()) {
    for (std::size_t k = 0; k < trajs.size(); ++k) {
      const int top = 2 + 8 * static_cast<int>(k);
      for (int r = top; r < top + 6; ++r) {
        for (int c = 2; c < 14; ++c) plot_pixel(plot.image, r, c, plot.colors[k]);
      }
    }
  }
  return plot;
}

void write_raster(std::ostream& out, const RgbImage& image) {
  if (image.width <= 0 || image.height <= 0) {
    throw DimensionError("write_raster: image extents must be positive");
  }
  if (image.pixels.size() != static_cast<std::size_t>(image.width) * image.height * 3) {
    throw DimensionError("write_raster: pixel buffer does not match extents");
  }
  out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.pixels.data()),
            static_cast<std::streamsize>(image.pixels.size()));
  if (!out) throw std::runtime_error("write_raster: write failed");
}

void write_raster(const std::string& path, const RgbImage& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  write_raster(out, image);
}

namespace {

int read_header_int(std::istream& in) {
  int ch = in.get();
  while (ch != EOF) {
    if (ch == '#') {
      while (ch != EOF && ch != '\n') ch = in.get();
    } else if (!std::isspace(ch)) {
      break;
    }
    ch = in.get();
  }
  if (ch == EOF || !std::isdigit(ch)) throw FormatError("P6: malformed header");
  long v = 0;
  while (ch != EOF && std::isdigit(ch)) {
    v = v * 10 + (ch - '0');
    if (v > (1 << 20)) throw FormatError("P6: header value too large");
    ch = in.get();
  }
  if (ch == EOF || !std::isspace(ch)) throw FormatError("P6: malformed header");
  return static_cast<int>(v);
}

}  // namespace

RgbImage read_raster(std::istream& in) {
  char magic[2];
  if (!in.read(magic, 2) || magic[0] != 'P' || magic[1] != '6') {
    throw FormatError("P6: bad magic");
  }
  const int w = read_header_int(in);
  const int h = read_header_int(in);
  const int maxval = read_header_int(in);
  if (w == 0 || h == 0) throw FormatError("P6: zero dimension");
  if (maxval != 255) throw FormatError("P6: only maxval 255 is supported");
  RgbImage img(w, h);
  if (!in.read(reinterpret_cast<char*>(img.pixels.data()),
               static_cast<std::streamsize>(img.pixels.size()))) {
    throw FormatError("P6: truncated pixel data");
  }
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError("P6: trailing bytes");
  return img;
}

RgbImage read_raster(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path + "' for reading");
  return read_raster(in);
}

}  // namespace mfgvo
