#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace patvcm {

template <typename Scalar>
using Grid = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Plane = Grid<std::uint8_t>;
using Mask = Grid<bool>;
using DepthMap = Grid<float>;

// One RGB frame stored as three row-major planes indexed (row, col).
struct Frame {
  std::array<Plane, 3> rgb;

  Frame() = default;
  Frame(int height, int width) {
    for (auto& p : rgb) p = Plane::Zero(height, width);
  }

  static Frame filled(int height, int width, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    Frame f;
    f.rgb[0] = Plane::Constant(height, width, r);
    f.rgb[1] = Plane::Constant(height, width, g);
    f.rgb[2] = Plane::Constant(height, width, b);
    return f;
  }

  int height() const { return static_cast<int>(rgb[0].rows()); }
  int width() const { return static_cast<int>(rgb[0].cols()); }

  bool operator==(const Frame& o) const {
    for (int c = 0; c < 3; ++c) {
      if (rgb[c].rows() != o.rgb[c].rows() || rgb[c].cols() != o.rgb[c].cols()) return false;
      if (!(rgb[c] == o.rgb[c]).all()) return false;
    }
    return true;
  }
};

// T x H x W x 3 clip. Decoded reconstructions use the same type.
struct VideoClip {
  std::vector<Frame> frames;
  std::uint64_t seed = 0;

  int num_frames() const { return static_cast<int>(frames.size()); }
  int height() const { return frames.empty() ? 0 : frames.front().height(); }
  int width() const { return frames.empty() ? 0 : frames.front().width(); }

  bool operator==(const VideoClip& o) const { return frames == o.frames; }
};

using ReconClip = VideoClip;

inline constexpr double kLumaR = 0.299;
inline constexpr double kLumaG = 0.587;
inline constexpr double kLumaB = 0.114;

template <typename Scalar = double>
Grid<Scalar> luminance(const Frame& f) {
  return kLumaR * f.rgb[0].cast<Scalar>() + kLumaG * f.rgb[1].cast<Scalar>() +
         kLumaB * f.rgb[2].cast<Scalar>();
}

// Axis-aligned pixel box covering columns [x0, x0 + w) and rows [y0, y0 + h).
struct Box {
  int x0 = 0;
  int y0 = 0;
  int w = 0;
  int h = 0;
  double confidence = 0.0;

  int x1() const { return x0 + w; }
  int y1() const { return y0 + h; }
  long area() const { return static_cast<long>(w) * h; }
  bool contains(int x, int y) const { return x >= x0 && x < x1() && y >= y0 && y < y1(); }

  bool operator==(const Box& o) const {
    return x0 == o.x0 && y0 == o.y0 && w == o.w && h == o.h && confidence == o.confidence;
  }
};

using FrameDetections = std::vector<Box>;
using ClipDetections = std::vector<FrameDetections>;

// A region of interest: the expanded box written back by auxiliary streams
// and the detection it was derived from.
struct Roi {
  Box box;
  Box detection;
  bool operator==(const Roi&) const = default;
};

struct Point {
  int x = 0;
  int y = 0;
  bool operator==(const Point&) const = default;
};

struct Keypoint {
  double x = 0.0;
  double y = 0.0;
};

inline double box_iou(const Box& a, const Box& b) {
  const int ix = std::max(0, std::min(a.x1(), b.x1()) - std::max(a.x0, b.x0));
  const int iy = std::max(0, std::min(a.y1(), b.y1()) - std::max(a.y0, b.y0));
  const double inter = static_cast<double>(ix) * iy;
  const double uni = static_cast<double>(a.area()) + static_cast<double>(b.area()) - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

inline void check_same_shape(const VideoClip& a, const VideoClip& b) {
  if (a.num_frames() != b.num_frames() || a.height() != b.height() || a.width() != b.width()) {
    throw std::domain_error("clip dimensions differ");
  }
}

}  // namespace patvcm
