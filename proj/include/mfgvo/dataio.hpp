#pragma once

// Binary rasters and text records. See FORMATS.md for byte layouts.
//
//   FLO1  u32 width, u32 height, then H*W*(u, v) float32, row-major
//   DEP1  u32 width, u32 height, then H*W float32
//   MSK1  u32 width, u32 height, then H*W bytes, each 0 or 1
//
// All integers and floats are little-endian. Readers reject bad magic,
// truncation, trailing bytes and non-finite values; nothing partial escapes.

#include <iosfwd>
#include <string>
#include <vector>

#include "mfgvo/geometry.hpp"

namespace mfgvo {

void write_flow(std::ostream& out, const FlowField& field);
FlowField read_flow(std::istream& in);
void write_flow(const std::string& path, const FlowField& field);
FlowField read_flow(const std::string& path);

void write_depth(std::ostream& out, const Grid<double>& depth);
Grid<double> read_depth(std::istream& in);
void write_depth(const std::string& path, const Grid<double>& depth);
Grid<double> read_depth(const std::string& path);

void write_mask(std::ostream& out, const Mask& mask);
Mask read_mask(std::istream& in);
void write_mask(const std::string& path, const Mask& mask);
Mask read_mask(const std::string& path);

/// One line per pose: row-major 3x4 [R | translation], 12 numbers. Rotations
/// must be orthonormal to 1e-3 and are projected onto SO(3) on load.
Trajectory read_pose_file(std::istream& in);
Trajectory read_pose_file(const std::string& path);
void write_pose_file(std::ostream& out, const Trajectory& poses);
void write_pose_file(const std::string& path, const Trajectory& poses);

/// Flow files store pixels per frame; the math runs in normalized units.
FlowField pixels_to_normalized(const FlowField& pixels, const CameraModel& cam);
FlowField normalized_to_pixels(const FlowField& normalized, const CameraModel& cam);

struct ManifestRecord {
  std::string id;
  std::string flow_path;
  std::string depth_path;  // inverse depth raster (DEP1)
  std::string mask_path;
  EgoMotion gt;
};

struct Manifest {
  CameraModel camera;
  std::vector<ManifestRecord> records;
  /// Records form one consecutive sequence (poses file present).
  bool sequence = false;
};

/// Text manifest:
///   mfgvo-manifest 1
///   camera <f> <cx> <cy> <width> <height>
///   sequence <0|1>
///   <id> <flow> <depth> <mask> <tx> <ty> <tz> <wx> <wy> <wz>
/// Paths are relative to the manifest's directory.
void write_manifest(std::ostream& out, const Manifest& manifest);
Manifest read_manifest(std::istream& in);
void write_manifest(const std::string& path, const Manifest& manifest);
Manifest read_manifest(const std::string& path);

}  // namespace mfgvo
