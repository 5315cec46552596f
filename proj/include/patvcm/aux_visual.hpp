#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "patvcm/baseline_codec.hpp"
#include "patvcm/bitio.hpp"
#include "patvcm/fsq.hpp"
#include "patvcm/roi.hpp"
#include "patvcm/task_model.hpp"

namespace patvcm {

inline constexpr std::uint8_t kTaskDetection = 0;
inline constexpr std::uint8_t kTaskSegmentation = 1;
inline constexpr std::uint8_t kTaskDepth = 2;
inline constexpr std::uint8_t kTaskRecognition = 3;
inline constexpr std::uint8_t kTaskPose = 4;

// A visual residual branch. residual_gain maps a mean pixel residual onto the
// feature axis (feature = delta * gain / 255), so later branches, which see
// smaller residuals, quantize them more finely.
struct AuxBranch {
  std::uint8_t task_id = kTaskDetection;
  int stage = 1;
  double residual_gain = 4.0;
};

inline constexpr AuxBranch kDetAux{kTaskDetection, 1, 8.0};
inline constexpr AuxBranch kSegAux{kTaskSegmentation, 2, 16.0};
inline constexpr AuxBranch kDepthAux{kTaskDepth, 2, 16.0};

// Throws std::domain_error for task ids without a visual branch.
const AuxBranch& visual_branch(std::uint8_t task_id);

inline constexpr int kAuxCodeBits = 12;
const FsqSpec& aux_fsq_spec();

struct AuxVisualStream {
  int stage = 1;
  std::uint8_t task_id = kTaskDetection;
  std::vector<std::uint16_t> codes;  // one FSQ[8,8,8,8] index per ROI cell, roi_cells order

  bool operator==(const AuxVisualStream&) const = default;
};

// Residual over (cell footprint x group frames) ∩ ROI: mean dR, dG, dB and
// a luma contrast gain (least-squares scale of the reconstruction's luma
// deviations onto the original's). Both are offset by half a quantizer step
// so that "no correction" lands exactly on a center.
Eigen::Vector4d residual_feature(const VideoClip& orig, const ReconClip& recon, const RoiSet& rois,
                                 const LatentCell& cell, const AuxBranch& branch, const CodecProfile& profile);

AuxVisualStream encode_aux(const VideoClip& orig, const ReconClip& recon, const RoiSet& rois,
                           const AuxBranch& branch, const CodecProfile& profile);

// Pixels outside every ROI are returned unchanged.
ReconClip decode_aux(const AuxVisualStream& stream, const ReconClip& recon, const RoiSet& rois,
                     const CodecProfile& profile);

std::uint64_t aux_bits(const AuxVisualStream& stream);

BitPayload pack_aux(const AuxVisualStream& stream);
AuxVisualStream unpack_aux(const BitPayload& payload, int stage, std::uint8_t task_id);

struct ChainResult {
  RoiSet stage1;
  ReconClip det_refined;
  RoiSet stage2;
  std::vector<ReconClip> task_refined;  // one per stream after the first
};

// streams[0] is the stage-1 detection stream; the rest are stage-2 task
// streams, each applied to the detection-refined clip.
ChainResult chain(std::span<const AuxVisualStream> streams, const ReconClip& recon0, const TaskModel& detector,
                  const CodecProfile& profile);

}  // namespace patvcm
