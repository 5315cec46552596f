#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "patvcm/image.hpp"
#include "patvcm/task_model.hpp"

namespace patvcm {

using Rgb = std::array<std::uint8_t, 3>;

// 80 colors by farthest-point sampling on a grid inside [40, 215]^3.
const std::vector<Rgb>& class_palette();
const std::vector<std::string>& class_names();
// -1 when the name is not a class.
int class_of_name(const std::string& name);
int nearest_palette_class(const Eigen::Vector3d& color);

// Templated caption for a class: "a <name>".
std::string class_caption(int class_id);
// Inverse of class_caption; -1 when the caption names no class.
int class_of_caption(const std::string& caption);

// COCO keypoint order; (u, v) fractions of the person box.
const std::array<Keypoint, 17>& skeleton_layout();
std::vector<Keypoint> skeleton_in_box(const Box& box);

// Per-channel plane c0 + c1*x + c2*y fitted by least squares to a border ring.
struct BackgroundModel {
  Eigen::Matrix3d coeff;  // row = channel

  double at(int channel, double x, double y) const {
    return coeff(channel, 0) + coeff(channel, 1) * x + coeff(channel, 2) * y;
  }
};

inline constexpr int kBackgroundRing = 4;
BackgroundModel estimate_background(const Frame& frame);
// Max over channels of |pixel - background|, per pixel.
Grid<double> contrast_map(const Frame& frame, const BackgroundModel& bg);

struct ToyParams {
  double detect_threshold = 24.0;
  int min_area = 24;
  double segment_tolerance = 24.0;
};

// Deterministic stand-ins for the frozen task models.
class ToyTaskModel final : public TaskModel {
 public:
  explicit ToyTaskModel(ToyParams params = {}) : params_(params) {}

  unsigned capabilities() const override {
    return kCapDetect | kCapSegment | kCapDepth | kCapClassify | kCapPose | kCapCaption;
  }
  const ToyParams& params() const { return params_; }

  // Components of contrast > detect_threshold with area >= min_area; box is
  // the component bbox, confidence its mean contrast / 255.
  FrameDetections detect(const Frame& frame) const override;
  // Region growing inside the box from each positive seed (box center when
  // none) with tolerance segment_tolerance on the max channel distance to the
  // seed color; each negative seed removes its own grown region. Throws
  // std::domain_error for a seed outside the box.
  Mask segment(const Frame& frame, const Box& box, std::span<const PromptPoint> points) const override;
  // Grows from the box center and the 32 prompt candidates and keeps the
  // region whose mean color is nearest the captioned class color.
  Mask segment_with_caption(const Frame& frame, const Box& box, const std::string& caption) const override;
  // Luminance / 255.
  DepthMap depth(const Frame& frame) const override;
  // Nearest palette color to the mean foreground color inside the box.
  int classify(const Frame& frame, const Box& box) const override;
  // Fixed fractional offsets applied to the foreground bbox inside the box.
  std::vector<Keypoint> pose(const Frame& frame, const Box& box) const override;
  std::string caption(const Frame& frame, const Box& box) const override;

  Mask grow(const Frame& frame, const Box& box, Point seed) const;

 private:
  Mask foreground(const Frame& frame, const Box& box) const;

  ToyParams params_;
};

}  // namespace patvcm
