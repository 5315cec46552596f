#pragma once

#include <cstdint>
#include <vector>

#include "patvcm/baseline_codec.hpp"
#include "patvcm/image.hpp"

namespace patvcm {

// Expansion factor as an exact ratio so outward rounding is reproducible.
struct ExpansionFactor {
  int num = 1;
  int den = 1;
};

struct RoiRule {
  double min_confidence = 0.0;   // inclusive
  double max_confidence = 2.0;   // exclusive
  int max_boxes = 3;
  ExpansionFactor expansion;
};

inline constexpr RoiRule kStage1Rule{0.05, 0.5, 3, {13, 10}};
inline constexpr RoiRule kStage2Rule{0.3, 2.0, 3, {2, 1}};

struct RoiSet {
  int stage = 1;
  std::vector<std::vector<Roi>> frames;

  std::size_t total() const;
  bool empty() const { return total() == 0; }
  bool operator==(const RoiSet&) const = default;
};

// Deterministic order: confidence descending, then y0, x0, w, h ascending.
bool roi_order(const Box& a, const Box& b);

// Scale about the center, round outward to integers, clamp to the frame.
Box expand_box(const Box& b, ExpansionFactor factor, int frame_width, int frame_height);

RoiSet select_rois(const ClipDetections& dets, const RoiRule& rule, int stage, int frame_width, int frame_height);
RoiSet select_stage1(const ClipDetections& dets, int frame_width, int frame_height);
RoiSet select_stage2(const ClipDetections& dets, int frame_width, int frame_height);

struct LatentCell {
  int t = 0;
  int i = 0;
  int j = 0;
  auto operator<=>(const LatentCell&) const = default;
};

// Cells whose pixel footprint meets any ROI box in any frame of their
// temporal group, sorted by (t, i, j) without duplicates.
std::vector<LatentCell> roi_cells(const RoiSet& rois, const LatentDims& dims, const CodecProfile& profile);

// Union of ROI boxes for one frame.
Mask roi_mask(const RoiSet& rois, int frame, int height, int width);

// Canonical byte image used to compare encoder- and decoder-side sets.
std::vector<std::uint8_t> serialize_roiset(const RoiSet& rois);

}  // namespace patvcm
