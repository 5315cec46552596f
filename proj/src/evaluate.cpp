#include "patvcm/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <ostream>

#include "patvcm/metrics.hpp"

namespace patvcm {
namespace {

struct Instance {
  int frame = 0;
  Roi roi;
  int object = -1;
  Mask target;
  long area = 0;
};

struct Reference {
  ReconClip recon0;
  std::vector<Instance> instances;
  std::vector<double> seg_baseline;
  std::vector<double> roi_baseline;
};

std::optional<double> roi_absrel(const DepthMap& pred, const DepthMap& gt, const Box& box) {
  const auto p = pred.block(box.y0, box.x0, box.h, box.w).cast<double>();
  const auto g = gt.block(box.y0, box.x0, box.h, box.w).cast<double>();
  const Mask valid = g > kDepthValidEps;
  const ScaleShift st = align_scale_shift(p, g, valid);
  const Grid<double> aligned = st.s * p + st.t;
  const auto s = depth_scores(aligned, g, valid);
  return s ? std::optional<double>(s->absrel) : std::nullopt;
}

Reference make_reference(const ClipInput& in, int profile, const TaskModel& model) {
  PipelineConfig ref;
  ref.label = "reference";
  ref.profile = profile;
  ref.det = true;
  const GroundTruthOracle oracle(in.truth);
  const EncodeResult enc = pipeline_encode(in.clip, ref, model, oracle);
  Reference r;
  r.recon0 = enc.recon0;
  for (const RoiRef& rr : flatten(enc.stage2)) {
    const int o = match_object(in.truth, rr.frame, rr.roi.detection);
    if (o < 0) continue;
    const ObjectTruth& obj = in.truth.objects[static_cast<std::size_t>(o)];
    Instance inst;
    inst.frame = rr.frame;
    inst.roi = rr.roi;
    inst.object = o;
    inst.target = crop_to_box(obj.masks[static_cast<std::size_t>(rr.frame)], rr.roi.box);
    inst.area = static_cast<long>(obj.masks[static_cast<std::size_t>(rr.frame)].count());
    const Frame& f = r.recon0.frames[static_cast<std::size_t>(rr.frame)];
    r.seg_baseline.push_back(mask_iou(model.segment(f, rr.roi.box, {}), inst.target));
    const auto ar = roi_absrel(model.depth(f), in.truth.depth[static_cast<std::size_t>(rr.frame)], rr.roi.box);
    r.roi_baseline.push_back(ar.value_or(0.0));
    r.instances.push_back(std::move(inst));
  }
  return r;
}

std::optional<std::size_t> find_roi(const std::vector<RoiRef>& rois, const Instance& inst) {
  for (std::size_t k = 0; k < rois.size(); ++k) {
    if (rois[k].frame == inst.frame && rois[k].roi == inst.roi) return k;
  }
  return std::nullopt;
}

template <typename T>
double mean_vec(const std::vector<T>& v) {
  if (v.empty()) return 0.0;
  double s = 0;
  for (const T& x : v) s += static_cast<double>(x);
  return s / static_cast<double>(v.size());
}

}  // namespace

double ClipScores::mean_seg_iou() const { return mean_vec(seg_iou); }
double ClipScores::mean_roi_absrel() const { return mean_vec(roi_absrel); }

std::vector<ClipScores> evaluate_clip(const ClipInput& in, const std::vector<PipelineConfig>& systems,
                                      const TaskModel& model) {
  const VideoClip& clip = in.clip;
  const GroundTruthOracle oracle(in.truth);
  std::map<int, Reference> refs;
  std::vector<FrameDetections> pseudo_gt;
  for (const Frame& f : clip.frames) pseudo_gt.push_back(model.detect(f));

  std::vector<ClipScores> out;
  for (const PipelineConfig& cfg : systems) {
    auto it = refs.find(cfg.profile);
    if (it == refs.end()) it = refs.emplace(cfg.profile, make_reference(in, cfg.profile, model)).first;
    const Reference& ref = it->second;

    const EncodeResult enc = pipeline_encode(clip, cfg, model, oracle);
    const std::vector<std::uint8_t> bytes = mux(enc.stream);
    const Bitstream parsed = demux(bytes);
    const DecodeResult dec = pipeline_decode(parsed, model);
    const std::vector<RoiRef> rois = flatten(dec.stage2);

    ClipScores s;
    s.bits = parsed.total_bits();
    s.pixels = static_cast<std::uint64_t>(clip.num_frames()) * clip.height() * clip.width();
    s.psnr = psnr(clip, dec.recon0);

    const ReconClip& seg_frames = dec.segmentation_frames();
    const ReconClip& det_frames = dec.detection_frames();
    const ReconClip& depth_frames = dec.depth_frames();

    for (std::size_t i = 0; i < ref.instances.size(); ++i) {
      const Instance& inst = ref.instances[i];
      const auto f = static_cast<std::size_t>(inst.frame);
      const ObjectTruth& obj = in.truth.objects[static_cast<std::size_t>(inst.object)];
      const auto k = find_roi(rois, inst);
      std::optional<PromptToken> prompt;
      std::optional<std::string> text;
      if (k) {
        prompt = dec.prompts[*k];
        text = dec.texts[*k];
      }
      s.seg_iou.push_back(mask_iou(segment_roi(model, seg_frames.frames[f], inst.roi, prompt, text), inst.target));
      s.seg_baseline_iou.push_back(ref.seg_baseline[i]);
      s.seg_area.push_back(inst.area);

      const auto ar = roi_absrel(model.depth(depth_frames.frames[f]), in.truth.depth[f], inst.roi.box);
      s.roi_absrel.push_back(ar.value_or(0.0));
      s.roi_baseline_absrel.push_back(ref.roi_baseline[i]);
      s.roi_area.push_back(inst.area);

      const int cls = (k && dec.classes[*k]) ? *dec.classes[*k] : model.classify(det_frames.frames[f], inst.roi.box);
      s.class_correct += cls == obj.class_id ? 1 : 0;
      ++s.class_total;

      if (obj.kind == ShapeKind::Figure) {
        const std::vector<Keypoint> kp =
            (k && dec.skeletons[*k]) ? *dec.skeletons[*k] : model.pose(det_frames.frames[f], inst.roi.box);
        s.pose_mke.push_back(mke(kp, obj.keypoints[f]));
      }
    }

    for (int f = 0; f < clip.num_frames(); ++f) {
      const auto fi = static_cast<std::size_t>(f);
      const FrameDetections pred = model.detect(det_frames.frames[fi]);
      const MatchResult m = match_detections(pseudo_gt[fi], pred);
      for (const MatchPair& p : m.pairs) {
        s.det_iou_sum += p.iou;
        s.det_matched_only_sum += p.iou;
        s.det_hits += p.iou >= 0.5 ? 1 : 0;
      }
      s.det_pairs += m.pairs.size();
      s.det_gt += m.gt_count;

      const Grid<double> pd = model.depth(depth_frames.frames[fi]).cast<double>();
      const Grid<double> gd = in.truth.depth[fi].cast<double>();
      const Mask valid = gd > kDepthValidEps;
      const ScaleShift st = align_scale_shift(pd, gd, valid);
      const Grid<double> aligned = st.s * pd + st.t;
      if (const auto ds = depth_scores(aligned, gd, valid)) {
        s.depth_absrel.push_back(ds->absrel);
        s.depth_delta.push_back(ds->delta);
        s.depth_rmse.push_back(ds->rmse);
      }
      s.normal_mae.push_back(normal_mae_deg(normals_from_depth(aligned), normals_from_depth(gd)));
    }

    for (const AuxStreamRecord& rec : parsed.records) {
      if (rec.type_tag == static_cast<std::uint8_t>(AuxType::Text)) s.text_bits += rec.payload_bits();
    }
    if (cfg.text != TextMode::None) {
      s.text_rois = rois.size();
      s.text_sent = static_cast<std::size_t>(std::count_if(dec.texts.begin(), dec.texts.end(),
                                                           [](const auto& t) { return t.has_value(); }));
    }
    out.push_back(std::move(s));
  }
  return out;
}

double campaign_bpp(const Campaign& c, std::size_t system) {
  std::uint64_t bits = 0, pixels = 0;
  for (const auto& clip : c.per_clip) {
    bits += clip[system].bits;
    pixels += clip[system].pixels;
  }
  return pixels ? static_cast<double>(bits) / static_cast<double>(pixels) : 0.0;
}

namespace {

std::string difficulty_key(Bin b) { return std::string("[difficulty ") + bin_name(b) + "]"; }
std::string size_key(long area) { return std::string("[size ") + size_bin_name(size_bin(area)) + "]"; }

}  // namespace

std::vector<ReportRow> report_rows(const Campaign& c) {
  std::vector<ReportRow> rows;
  for (std::size_t s = 0; s < c.systems.size(); ++s) {
    const std::string& label = c.systems[s].label;
    const double bpp = campaign_bpp(c, s);
    auto add = [&](const std::string& task, const std::string& metric, double v) {
      rows.push_back({task, label, bpp, metric, v});
    };
    std::vector<double> seg, roi, absr, delta, rms, mae, mke_all;
    std::map<std::string, std::vector<double>> seg_bins, roi_bins;
    double det_sum = 0, det_only = 0;
    std::size_t det_gt = 0, det_hits = 0, det_pairs = 0, cls_ok = 0, cls_n = 0, text_rois = 0, text_sent = 0;
    std::uint64_t text_bits = 0;
    for (const auto& clip : c.per_clip) {
      const ClipScores& cs = clip[s];
      for (std::size_t i = 0; i < cs.seg_iou.size(); ++i) {
        seg.push_back(cs.seg_iou[i]);
        seg_bins[difficulty_key(difficulty_bin(cs.seg_baseline_iou[i], DifficultyTask::Segmentation))].push_back(
            cs.seg_iou[i]);
        seg_bins[size_key(cs.seg_area[i])].push_back(cs.seg_iou[i]);
      }
      for (std::size_t i = 0; i < cs.roi_absrel.size(); ++i) {
        roi.push_back(cs.roi_absrel[i]);
        roi_bins[difficulty_key(difficulty_bin(cs.roi_baseline_absrel[i], DifficultyTask::Depth))].push_back(
            cs.roi_absrel[i]);
        roi_bins[size_key(cs.roi_area[i])].push_back(cs.roi_absrel[i]);
      }
      absr.insert(absr.end(), cs.depth_absrel.begin(), cs.depth_absrel.end());
      delta.insert(delta.end(), cs.depth_delta.begin(), cs.depth_delta.end());
      rms.insert(rms.end(), cs.depth_rmse.begin(), cs.depth_rmse.end());
      mae.insert(mae.end(), cs.normal_mae.begin(), cs.normal_mae.end());
      mke_all.insert(mke_all.end(), cs.pose_mke.begin(), cs.pose_mke.end());
      det_sum += cs.det_iou_sum;
      det_only += cs.det_matched_only_sum;
      det_gt += cs.det_gt;
      det_hits += cs.det_hits;
      det_pairs += cs.det_pairs;
      cls_ok += cs.class_correct;
      cls_n += cs.class_total;
      text_rois += cs.text_rois;
      text_sent += cs.text_sent;
      text_bits += cs.text_bits;
    }
    add("segmentation", "Mean IoU", mean_vec(seg));
    for (const auto& [bin, v] : seg_bins) {
      add("segmentation", "Mean IoU " + bin, mean_vec(v));
      add("segmentation", "instances " + bin, static_cast<double>(v.size()));
    }
    add("detection", "matched IoU", det_gt ? det_sum / static_cast<double>(det_gt) : 0.0);
    add("detection", "matched IoU (matched only)", det_pairs ? det_only / static_cast<double>(det_pairs) : 0.0);
    add("detection", "Recall@0.5", det_gt ? static_cast<double>(det_hits) / static_cast<double>(det_gt) : 0.0);
    add("depth", "AbsRel", mean_vec(absr));
    add("depth", "δ<1.25", mean_vec(delta));
    add("depth", "RMSE", mean_vec(rms));
    add("depth", "ROI AbsRel", mean_vec(roi));
    for (const auto& [bin, v] : roi_bins) {
      add("depth", "ROI AbsRel " + bin, mean_vec(v));
      add("depth", "instances " + bin, static_cast<double>(v.size()));
    }
    add("normals", "MAE°", mean_vec(mae));
    add("recognition", "class agreement %", cls_n ? 100.0 * static_cast<double>(cls_ok) / static_cast<double>(cls_n) : 0.0);
    if (!mke_all.empty()) add("pose", "MKE (px)", mean_vec(mke_all));
    if (c.systems[s].text != TextMode::None) {
      add("text", "text bits/ROI", text_rois ? static_cast<double>(text_bits) / static_cast<double>(text_rois) : 0.0);
      add("text", "hard fraction", text_rois ? static_cast<double>(text_sent) / static_cast<double>(text_rois) : 0.0);
    }
  }
  if (c.skipped > 0) rows.push_back({"corpus", "all", 0.0, "clips skipped (no ground truth)", static_cast<double>(c.skipped)});
  return rows;
}

std::vector<ReportRow> rate_sweep(const std::vector<ClipInput>& corpus, const std::vector<int>& profiles,
                                  const TaskModel& model, const std::vector<PipelineConfig>& operating_points) {
  if (profiles.size() < 2) throw std::domain_error("rate sweep needs at least two profiles");
  Campaign c;
  for (int p : profiles) {
    PipelineConfig cfg;
    cfg.label = "baseline profile " + std::to_string(p);
    cfg.profile = p;
    c.systems.push_back(cfg);
  }
  c.systems.insert(c.systems.end(), operating_points.begin(), operating_points.end());
  for (const ClipInput& in : corpus) c.per_clip.push_back(evaluate_clip(in, c.systems, model));

  std::vector<ReportRow> rows;
  std::vector<std::pair<double, double>> curve;  // (bpp, psnr) per profile
  for (std::size_t s = 0; s < c.systems.size(); ++s) {
    const double bpp = campaign_bpp(c, s);
    double psnr_sum = 0, iou_sum = 0;
    std::size_t iou_n = 0;
    for (const auto& clip : c.per_clip) {
      psnr_sum += clip[s].psnr;
      for (double v : clip[s].seg_iou) {
        iou_sum += v;
        ++iou_n;
      }
    }
    const double psnr_mean = c.per_clip.empty() ? 0.0 : psnr_sum / static_cast<double>(c.per_clip.size());
    rows.push_back({"sweep", c.systems[s].label, bpp, "PSNR", psnr_mean});
    rows.push_back({"sweep", c.systems[s].label, bpp, "Mean IoU", iou_n ? iou_sum / static_cast<double>(iou_n) : 0.0});
    if (s < profiles.size()) curve.emplace_back(bpp, psnr_mean);
  }
  std::sort(curve.begin(), curve.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  bool monotone = true;
  for (std::size_t i = 1; i < curve.size(); ++i) monotone = monotone && curve[i].second <= curve[i - 1].second;
  rows.push_back({"sweep", "all", 0.0, "monotone", monotone ? 1.0 : 0.0});
  return rows;
}

void write_csv(std::ostream& os, const std::vector<ReportRow>& rows) {
  os << "task,system,bpp,metric,value\n";
  for (const ReportRow& r : rows) {
    os << r.task << ',' << r.system << ',' << std::fixed << std::setprecision(6) << r.bpp << ',' << r.metric << ','
       << std::setprecision(6) << r.value << '\n';
  }
}

}  // namespace patvcm
