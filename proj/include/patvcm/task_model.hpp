#pragma once

#include <span>
#include <string>
#include <vector>

#include "patvcm/image.hpp"

namespace patvcm {

struct PromptPoint {
  Point at;
  bool positive = true;
};

enum Capability : unsigned {
  kCapDetect = 1u << 0,
  kCapSegment = 1u << 1,
  kCapDepth = 1u << 2,
  kCapClassify = 1u << 3,
  kCapPose = 1u << 4,
  kCapCaption = 1u << 5,
};

// Frozen downstream models. Every call must be a pure function of its input
// bytes: encoder and decoder both run detect() on identical reconstructions
// to derive the same ROIs without transmitting coordinates.
class TaskModel {
 public:
  virtual ~TaskModel() = default;

  virtual unsigned capabilities() const = 0;

  virtual FrameDetections detect(const Frame& frame) const = 0;
  // Empty points means "prompt with the box only".
  virtual Mask segment(const Frame& frame, const Box& box, std::span<const PromptPoint> points) const = 0;
  // Segmentation steered by a caption instead of points.
  virtual Mask segment_with_caption(const Frame& frame, const Box& box, const std::string& caption) const = 0;
  virtual DepthMap depth(const Frame& frame) const = 0;
  virtual int classify(const Frame& frame, const Box& box) const = 0;
  virtual std::vector<Keypoint> pose(const Frame& frame, const Box& box) const = 0;
  virtual std::string caption(const Frame& frame, const Box& box) const = 0;
};

ClipDetections detect_clip(const TaskModel& model, const VideoClip& clip);

// Encoder-only oracle that sees the uncompressed source: the target mask a
// high-capacity segmentor would produce on the original frame, and the caption
// a captioner would write for the ROI crop.
class EncoderOracle {
 public:
  virtual ~EncoderOracle() = default;
  virtual Mask target_mask(int frame_index, const Frame& original, const Roi& roi) const = 0;
  virtual std::string caption(int frame_index, const Frame& original, const Roi& roi) const = 0;
  virtual int class_label(int frame_index, const Frame& original, const Roi& roi) const = 0;
  virtual std::vector<Keypoint> keypoints(int frame_index, const Frame& original, const Roi& roi) const = 0;
};

}  // namespace patvcm
