#pragma once

// Flow rendering with the standard 55-bin color wheel, top-down trajectory
// plots, and a binary PPM (P6) writer.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mfgvo/geometry.hpp"

namespace mfgvo {

using Rgb = std::array<std::uint8_t, 3>;

struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major RGB triples

  RgbImage() = default;
  RgbImage(int w, int h, Rgb fill = {255, 255, 255});
  Rgb at(int row, int col) const;
  void set(int row, int col, Rgb c);
  bool operator==(const RgbImage&) const = default;
};

/// Segment sizes RY, YG, GC, CB, BM, MR.
inline constexpr std::array<int, 6> kWheelSegments = {15, 6, 4, 11, 13, 6};
inline constexpr int kWheelBins = 55;

/// Bin colors, 0..255 per channel, before interpolation.
const std::array<std::array<double, 3>, kWheelBins>& color_wheel();

/// Continuous wheel position in [0, 55) for flow direction (u, v). Periodic:
/// opposite directions land exactly half a turn (27.5 bins) apart.
double wheel_position(double u, double v);

/// Interpolated wheel color at a position (taken modulo 55), channels in [0, 1].
std::array<double, 3> wheel_color(double position);

/// Hue from direction, saturation from |v| / max. `max_magnitude` defaults to
/// the field's largest magnitude; a zero max renders all white. Magnitudes
/// above the max are drawn darkened.
RgbImage flow_to_image(const FlowField& field,
                       std::optional<double> max_magnitude = std::nullopt);

/// Binary mask to black-on-white.
RgbImage mask_to_image(const Mask& mask);

struct TrajectoryPlotOptions {
  int width = 320;
  int height = 320;
  double margin = 0.05;  // fraction of the data span added on each side
};

struct TrajectoryPlot {
  RgbImage image;
  std::vector<Rgb> colors;  // one per input trajectory, in order
  double x_min = 0, x_max = 0, z_min = 0, z_max = 0;  // plotted bounds
};

/// Top-down x-z view of camera centers, one polyline plus pose markers per
/// trajectory and a legend swatch column at the top-left. `labels` may be
/// empty or match `trajs` in size.
TrajectoryPlot trajectory_plot(const std::vector<Trajectory>& trajs,
                               const std::vector<std::string>& labels = {},
                               const TrajectoryPlotOptions& opts = {});

/// "P6\n<w> <h>\n255\n" followed by the RGB bytes.
void write_raster(std::ostream& out, const RgbImage& image);
void write_raster(const std::string& path, const RgbImage& image);

/// Minimal P6 reader (maxval 255, whitespace and comments in the header).
RgbImage read_raster(std::istream& in);
RgbImage read_raster(const std::string& path);

}  // namespace mfgvo
