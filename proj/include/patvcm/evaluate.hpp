#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "patvcm/pipeline.hpp"
#include "patvcm/scene.hpp"

namespace patvcm {

// One clip's scores for one system. Instance lists share the order of the
// evaluation instances: stage-2 ROIs of the reference system (same profile,
// detection stream only) that match a ground-truth object.
struct ClipScores {
  std::uint64_t bits = 0;
  std::uint64_t pixels = 0;

  std::vector<double> seg_iou;
  std::vector<double> seg_baseline_iou;  // same instance on the plain baseline
  std::vector<long> seg_area;

  double det_iou_sum = 0.0;  // unmatched pseudo-GT count as zero
  double det_matched_only_sum = 0.0;
  std::size_t det_pairs = 0;
  std::size_t det_gt = 0;
  std::size_t det_hits = 0;  // IoU >= 0.5

  std::vector<double> depth_absrel, depth_delta, depth_rmse, normal_mae;  // per frame
  std::vector<double> roi_absrel;
  std::vector<double> roi_baseline_absrel;
  std::vector<long> roi_area;

  std::size_t class_correct = 0;
  std::size_t class_total = 0;
  std::vector<double> pose_mke;

  std::size_t text_rois = 0;
  std::size_t text_sent = 0;
  std::uint64_t text_bits = 0;

  double psnr = 0.0;

  double mean_seg_iou() const;
  double mean_roi_absrel() const;
  double matched_iou() const { return det_gt ? det_iou_sum / static_cast<double>(det_gt) : 0.0; }
  double recall() const { return det_gt ? static_cast<double>(det_hits) / static_cast<double>(det_gt) : 0.0; }
};

struct ClipInput {
  VideoClip clip;
  GroundTruth truth;
};

// Encodes, serializes, demuxes and decodes every system on one clip, then
// scores the decoder's outputs. Decoding sees only the .patv bytes.
std::vector<ClipScores> evaluate_clip(const ClipInput& input, const std::vector<PipelineConfig>& systems,
                                      const TaskModel& model);

struct ReportRow {
  std::string task;
  std::string system;
  double bpp = 0.0;
  std::string metric;
  double value = 0.0;
};

struct Campaign {
  std::vector<PipelineConfig> systems;
  std::vector<std::vector<ClipScores>> per_clip;  // [clip][system]
  std::size_t skipped = 0;                         // clips without ground truth
};

// Pooled rows per system, plus difficulty- and size-bin breakdowns.
std::vector<ReportRow> report_rows(const Campaign& c);

// Baseline-only systems at each profile, with PSNR and segmentation IoU, and
// a final row flagging whether bpp and PSNR fall together along the list.
std::vector<ReportRow> rate_sweep(const std::vector<ClipInput>& corpus, const std::vector<int>& profiles,
                                  const TaskModel& model, const std::vector<PipelineConfig>& operating_points = {});

void write_csv(std::ostream& os, const std::vector<ReportRow>& rows);

// Pooled bits / pixels for one system of a campaign.
double campaign_bpp(const Campaign& c, std::size_t system);

}  // namespace patvcm
