#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "patvcm/aux_visual.hpp"
#include "patvcm/baseline_codec.hpp"
#include "patvcm/container.hpp"
#include "patvcm/prompt_codebook.hpp"
#include "patvcm/roi.hpp"
#include "patvcm/semantic_tokens.hpp"
#include "patvcm/task_model.hpp"

namespace patvcm {

enum class PromptMode { None, Single, Pair };

struct PipelineConfig {
  std::string label = "baseline";
  int profile = 0;
  bool det = false;
  bool seg = false;
  bool depth = false;
  PromptMode prompt = PromptMode::None;
  TextMode text = TextMode::None;
  bool class_token = false;
  bool skeleton = false;

  bool stage2() const {
    return seg || depth || prompt != PromptMode::None || text != TextMode::None || class_token || skeleton;
  }
};

// Throws ConfigError when a stage-2 stream is enabled without the detection
// stream, the profile id is unknown, or prompts meet a model that cannot segment.
void validate_config(const PipelineConfig& cfg, unsigned capabilities);

// Line-oriented "key = value"; "system = label" opens a block. '#' starts a
// comment. Throws ConfigError with the line number on bad input.
std::vector<PipelineConfig> parse_configs(std::istream& in);
std::vector<PipelineConfig> load_configs(const std::string& path);
std::string describe(const PipelineConfig& cfg);

// Stage-2 ROIs flattened in RoiSet order: frame-major, then within-frame order.
struct RoiRef {
  int frame = 0;
  Roi roi;
};
std::vector<RoiRef> flatten(const RoiSet& rois);

struct EncodeResult {
  Bitstream stream;
  ReconClip recon0;
  RoiSet stage1;
  ReconClip det_refined;
  RoiSet stage2;
  std::vector<double> seg_estimates;  // decoder-side IoU the encoder predicts, per stage-2 ROI
  std::size_t text_sent = 0;
};

// The encoder mirrors the decoder: it decodes its own baseline and runs the
// same detector on the same bytes, so ROI coordinates are never sent.
EncodeResult pipeline_encode(const VideoClip& clip, const PipelineConfig& cfg, const TaskModel& model,
                             const EncoderOracle& oracle);

struct DecodeResult {
  ClipHeader header;
  ReconClip recon0;
  bool has_det = false;
  RoiSet stage1;
  ReconClip det_refined;
  RoiSet stage2;
  std::optional<ReconClip> seg_refined;
  std::optional<ReconClip> depth_refined;
  // Per stage-2 ROI, present when the matching record was sent.
  std::vector<std::optional<PromptToken>> prompts;
  std::vector<std::optional<std::string>> texts;
  std::vector<std::optional<int>> classes;
  std::vector<std::optional<std::vector<Keypoint>>> skeletons;
  std::vector<std::string> warnings;

  // Frames each task reads.
  const ReconClip& detection_frames() const { return has_det ? det_refined : recon0; }
  const ReconClip& segmentation_frames() const { return seg_refined ? *seg_refined : detection_frames(); }
  const ReconClip& depth_frames() const { return depth_refined ? *depth_refined : detection_frames(); }
};

// Needs only the bitstream and the detector. Unknown records are skipped
// with a warning.
DecodeResult pipeline_decode(const Bitstream& stream, const TaskModel& model);
DecodeResult pipeline_decode(std::span<const std::uint8_t> bytes, const TaskModel& model);

// Decoder-side segmentation of one stage-2 ROI using whatever conditioning
// was received: caption first, then point prompts, then the box alone.
Mask segment_roi(const TaskModel& model, const Frame& frame, const Roi& roi, const std::optional<PromptToken>& prompt,
                 const std::optional<std::string>& text);

}  // namespace patvcm
