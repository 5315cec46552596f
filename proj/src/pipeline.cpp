#include "patvcm/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "patvcm/errors.hpp"
#include "patvcm/metrics.hpp"

namespace patvcm {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool parse_bool(const std::string& v, int line) {
  if (v == "on" || v == "true" || v == "yes" || v == "1") return true;
  if (v == "off" || v == "false" || v == "no" || v == "0") return false;
  throw ConfigError("line " + std::to_string(line) + ": expected on/off, got '" + v + "'");
}

int parse_int(const std::string& v, int line) {
  try {
    std::size_t used = 0;
    const int x = std::stoi(v, &used);
    if (used == v.size()) return x;
  } catch (const std::exception&) {
  }
  throw ConfigError("line " + std::to_string(line) + ": expected an integer, got '" + v + "'");
}

const char* prompt_name(PromptMode m) {
  switch (m) {
    case PromptMode::None: return "none";
    case PromptMode::Single: return "1pt";
    case PromptMode::Pair: return "fgbg";
  }
  return "?";
}

const char* text_name(TextMode m) {
  switch (m) {
    case TextMode::None: return "none";
    case TextMode::Uniform: return "uniform";
    case TextMode::Adaptive: return "adaptive";
  }
  return "?";
}

AuxStreamRecord visual_record(const AuxVisualStream& s) {
  return {static_cast<std::uint8_t>(AuxType::VisualResidual), s.task_id, pack_aux(s)};
}

Keypoint clamp_into(const Keypoint& k, const Box& b) {
  return {std::clamp(k.x, static_cast<double>(b.x0), static_cast<double>(b.x1()) - 1e-9),
          std::clamp(k.y, static_cast<double>(b.y0), static_cast<double>(b.y1()) - 1e-9)};
}

}  // namespace

void validate_config(const PipelineConfig& cfg, unsigned capabilities) {
  const auto& ladder = builtin_profiles();
  if (cfg.profile < 0 || cfg.profile >= static_cast<int>(ladder.size())) {
    throw ConfigError("system '" + cfg.label + "': unknown profile " + std::to_string(cfg.profile));
  }
  if (cfg.stage2() && !cfg.det) {
    throw ConfigError("system '" + cfg.label + "': stage-2 streams need det = on");
  }
  if ((cfg.prompt != PromptMode::None || cfg.text != TextMode::None) && !(capabilities & kCapSegment)) {
    throw ConfigError("system '" + cfg.label + "': prompts and text need a segment-capable task model");
  }
}

std::vector<PipelineConfig> parse_configs(std::istream& in) {
  std::vector<PipelineConfig> out;
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string text = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(line) + ": expected key = value");
    const std::string key = trim(text.substr(0, eq));
    const std::string val = trim(text.substr(eq + 1));
    if (key == "system") {
      if (val.empty()) throw ConfigError("line " + std::to_string(line) + ": empty system label");
      out.emplace_back().label = val;
      continue;
    }
    if (out.empty()) throw ConfigError("line " + std::to_string(line) + ": '" + key + "' before any system block");
    PipelineConfig& c = out.back();
    if (key == "profile") {
      c.profile = parse_int(val, line);
    } else if (key == "det") {
      c.det = parse_bool(val, line);
    } else if (key == "seg") {
      c.seg = parse_bool(val, line);
    } else if (key == "depth") {
      c.depth = parse_bool(val, line);
    } else if (key == "class") {
      c.class_token = parse_bool(val, line);
    } else if (key == "skeleton") {
      c.skeleton = parse_bool(val, line);
    } else if (key == "prompt") {
      if (val == "none") c.prompt = PromptMode::None;
      else if (val == "1pt") c.prompt = PromptMode::Single;
      else if (val == "fgbg") c.prompt = PromptMode::Pair;
      else throw ConfigError("line " + std::to_string(line) + ": prompt must be none, 1pt or fgbg");
    } else if (key == "text") {
      if (val == "none") c.text = TextMode::None;
      else if (val == "uniform") c.text = TextMode::Uniform;
      else if (val == "adaptive") c.text = TextMode::Adaptive;
      else throw ConfigError("line " + std::to_string(line) + ": text must be none, uniform or adaptive");
    } else {
      throw ConfigError("line " + std::to_string(line) + ": unknown key '" + key + "'");
    }
  }
  if (out.empty()) throw ConfigError("no system blocks");
  return out;
}

std::vector<PipelineConfig> load_configs(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path);
  return parse_configs(in);
}

std::string describe(const PipelineConfig& c) {
  std::ostringstream os;
  os << c.label << ": profile " << c.profile << " det " << c.det << " seg " << c.seg << " depth " << c.depth
     << " prompt " << prompt_name(c.prompt) << " text " << text_name(c.text) << " class " << c.class_token
     << " skeleton " << c.skeleton;
  return os.str();
}

std::vector<RoiRef> flatten(const RoiSet& rois) {
  std::vector<RoiRef> out;
  for (std::size_t f = 0; f < rois.frames.size(); ++f) {
    for (const Roi& r : rois.frames[f]) out.push_back({static_cast<int>(f), r});
  }
  return out;
}

Mask segment_roi(const TaskModel& model, const Frame& frame, const Roi& roi, const std::optional<PromptToken>& prompt,
                 const std::optional<std::string>& text) {
  if (text) return model.segment_with_caption(frame, roi.box, *text);
  if (prompt) {
    const auto pts = prompt_points(*prompt, roi.box);
    return model.segment(frame, roi.box, pts);
  }
  return model.segment(frame, roi.box, {});
}

EncodeResult pipeline_encode(const VideoClip& clip, const PipelineConfig& cfg, const TaskModel& model,
                             const EncoderOracle& oracle) {
  validate_config(cfg, model.capabilities());
  const CodecProfile& profile = profile_by_id(cfg.profile);
  const int width = clip.width(), height = clip.height();

  EncodeResult r;
  const LatentGrid latent = encode_clip(clip, profile);
  r.stream.baseline = pack_latent(latent, profile);
  r.recon0 = decode_clip(latent, clip.num_frames(), profile);
  r.det_refined = r.recon0;

  std::vector<AuxStreamRecord>& records = r.stream.records;
  if (cfg.det) {
    r.stage1 = select_stage1(detect_clip(model, r.recon0), width, height);
    const AuxVisualStream det = encode_aux(clip, r.recon0, r.stage1, kDetAux, profile);
    r.det_refined = decode_aux(det, r.recon0, r.stage1, profile);
    r.stage2 = select_stage2(detect_clip(model, r.det_refined), width, height);
    records.push_back(visual_record(det));
  }

  ReconClip seg_frames = r.det_refined;
  if (cfg.seg) {
    const AuxVisualStream s = encode_aux(clip, r.det_refined, r.stage2, kSegAux, profile);
    seg_frames = decode_aux(s, r.det_refined, r.stage2, profile);
    records.push_back(visual_record(s));
  }
  if (cfg.depth) records.push_back(visual_record(encode_aux(clip, r.det_refined, r.stage2, kDepthAux, profile)));

  const std::vector<RoiRef> rois = flatten(r.stage2);
  std::vector<PromptToken> prompts;
  std::vector<std::optional<TextToken>> texts;
  std::vector<int> classes;
  std::vector<std::optional<SkeletonToken>> skeletons;
  const AdaptivePolicy policy{cfg.text};

  for (const RoiRef& ref : rois) {
    const Frame& orig = clip.frames[static_cast<std::size_t>(ref.frame)];
    const Frame& seg = seg_frames.frames[static_cast<std::size_t>(ref.frame)];
    std::optional<PromptToken> prompt;
    if (cfg.prompt != PromptMode::None || cfg.text != TextMode::None) {
      const Mask target = oracle.target_mask(ref.frame, orig, ref.roi);
      if (cfg.prompt != PromptMode::None) {
        PromptSearch fg = select_fg(seg, ref.roi.box, target, model);
        prompt = fg.token;
        if (cfg.prompt == PromptMode::Pair) prompt = select_bg(seg, ref.roi.box, target, model, fg.token).token;
        prompts.push_back(*prompt);
      }
      if (cfg.text != TextMode::None) {
        const double estimate = mask_iou(segment_roi(model, seg, ref.roi, prompt, std::nullopt), target);
        r.seg_estimates.push_back(estimate);
        if (policy_decide(estimate, policy)) {
          texts.emplace_back(encode_text(oracle.caption(ref.frame, orig, ref.roi)).token);
          ++r.text_sent;
        } else {
          texts.emplace_back();
        }
      }
    }
    int cls = -1;
    if (cfg.class_token || cfg.skeleton) cls = oracle.class_label(ref.frame, orig, ref.roi);
    if (cfg.class_token) classes.push_back(cls);
    if (cfg.skeleton) {
      if (cls == 0) {
        std::vector<Keypoint> kps = oracle.keypoints(ref.frame, orig, ref.roi);
        for (Keypoint& k : kps) k = clamp_into(k, ref.roi.detection);
        skeletons.emplace_back(quantize_skeleton(kps, ref.roi.detection));
      } else {
        skeletons.emplace_back();
      }
    }
  }

  if (cfg.prompt != PromptMode::None) {
    records.push_back({static_cast<std::uint8_t>(AuxType::Prompt), kTaskSegmentation, pack_prompts(prompts)});
  }
  if (cfg.text != TextMode::None) {
    records.push_back({static_cast<std::uint8_t>(AuxType::Text), kTaskSegmentation, pack_texts(texts)});
  }
  if (cfg.class_token) {
    records.push_back({static_cast<std::uint8_t>(AuxType::ClassLabel), kTaskRecognition, pack_classes(classes)});
  }
  if (cfg.skeleton) {
    records.push_back({static_cast<std::uint8_t>(AuxType::Skeleton), kTaskPose, pack_skeletons(skeletons)});
  }

  ClipHeader& h = r.stream.header;
  h.frames = static_cast<std::uint16_t>(clip.num_frames());
  h.height = static_cast<std::uint16_t>(height);
  h.width = static_cast<std::uint16_t>(width);
  h.baseline_profile_id = profile.id;
  h.stream_count = static_cast<std::uint8_t>(records.size());
  return r;
}

DecodeResult pipeline_decode(std::span<const std::uint8_t> bytes, const TaskModel& model) {
  return pipeline_decode(demux(bytes), model);
}

DecodeResult pipeline_decode(const Bitstream& stream, const TaskModel& model) {
  DecodeResult d;
  d.header = stream.header;
  const CodecProfile* profile = nullptr;
  try {
    profile = &profile_by_id(stream.header.baseline_profile_id);
  } catch (const std::out_of_range&) {
    throw StructuralError("unknown baseline profile " + std::to_string(stream.header.baseline_profile_id));
  }
  const int frames = stream.header.frames, height = stream.header.height, width = stream.header.width;
  const LatentDims dims = latent_shape(frames, height, width, *profile);
  d.recon0 = decode_clip(unpack_latent(stream.baseline, dims, *profile), frames, *profile);
  d.det_refined = d.recon0;

  // Detection refinement first: every stage-2 record depends on it.
  for (const AuxStreamRecord& rec : stream.records) {
    if (rec.type_tag == static_cast<std::uint8_t>(AuxType::VisualResidual) && rec.task_id == kTaskDetection) {
      d.stage1 = select_stage1(detect_clip(model, d.recon0), width, height);
      d.det_refined = decode_aux(unpack_aux(rec.payload, 1, kTaskDetection), d.recon0, d.stage1, *profile);
      d.stage2 = select_stage2(detect_clip(model, d.det_refined), width, height);
      d.has_det = true;
      break;
    }
  }

  const std::size_t n = d.stage2.total();
  d.prompts.assign(n, std::nullopt);
  d.texts.assign(n, std::nullopt);
  d.classes.assign(n, std::nullopt);
  d.skeletons.assign(n, std::nullopt);
  const std::vector<RoiRef> rois = flatten(d.stage2);

  for (std::size_t i = 0; i < stream.records.size(); ++i) {
    const AuxStreamRecord& rec = stream.records[i];
    if (!rec.known()) {
      d.warnings.push_back("record " + std::to_string(i) + ": unknown type tag " + std::to_string(rec.type_tag) +
                           ", skipped");
      continue;
    }
    const auto type = static_cast<AuxType>(rec.type_tag);
    if (type == AuxType::VisualResidual && rec.task_id == kTaskDetection) continue;
    if (!d.has_det) throw StructuralError("record " + std::to_string(i) + " needs the detection stream");
    switch (type) {
      case AuxType::VisualResidual: {
        if (rec.task_id != kTaskSegmentation && rec.task_id != kTaskDepth) {
          d.warnings.push_back("record " + std::to_string(i) + ": visual residual for task " +
                               std::to_string(rec.task_id) + " has no branch, skipped");
          break;
        }
        ReconClip out = decode_aux(unpack_aux(rec.payload, 2, rec.task_id), d.det_refined, d.stage2, *profile);
        (rec.task_id == kTaskSegmentation ? d.seg_refined : d.depth_refined) = std::move(out);
        break;
      }
      case AuxType::Prompt: {
        auto p = unpack_prompts(rec.payload, n);
        for (std::size_t k = 0; k < n; ++k) d.prompts[k] = p[k];
        break;
      }
      case AuxType::Text: {
        auto t = unpack_texts(rec.payload, n);
        for (std::size_t k = 0; k < n; ++k) {
          if (t[k]) d.texts[k] = decode_text(*t[k]);
        }
        break;
      }
      case AuxType::ClassLabel: {
        auto c = unpack_classes(rec.payload, n);
        for (std::size_t k = 0; k < n; ++k) d.classes[k] = c[k];
        break;
      }
      case AuxType::Skeleton: {
        auto s = unpack_skeletons(rec.payload, n);
        for (std::size_t k = 0; k < n; ++k) {
          if (s[k]) d.skeletons[k] = dequantize_skeleton(*s[k], rois[k].roi.detection);
        }
        break;
      }
    }
  }
  return d;
}

}  // namespace patvcm
