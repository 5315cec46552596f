#include "patvcm/aux_visual.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "patvcm/errors.hpp"

namespace patvcm {
namespace {

// Offset that puts "zero correction" on center k=3 of an 8-level axis.
constexpr double kCenterOffset = -0.125;
constexpr double kMinLumaVariance = 0.25;
constexpr double kMinGain = 1.0 / 16.0;

struct CellStats {
  std::array<double, 3> delta{};
  double count = 0;
  double recon_luma_mean = 0;
  double gain = 1.0;
};

template <typename Fn>
void for_each_region_pixel(const RoiSet& rois, const std::vector<Mask>& masks, const LatentCell& cell, int frames,
                           const CodecProfile& profile, Fn&& fn) {
  const int s = profile.spatial_factor;
  const FrameRange fr = temporal_group(cell.t, frames, profile);
  for (int f = fr.first; f < fr.first + fr.count; ++f) {
    if (static_cast<std::size_t>(f) >= rois.frames.size()) continue;
    const Mask& m = masks[static_cast<std::size_t>(f)];
    for (int y = cell.i * s; y < (cell.i + 1) * s; ++y) {
      for (int x = cell.j * s; x < (cell.j + 1) * s; ++x) {
        if (m(y, x)) fn(f, y, x);
      }
    }
  }
}

std::vector<Mask> frame_masks(const RoiSet& rois, int frames, int height, int width) {
  std::vector<Mask> masks;
  masks.reserve(static_cast<std::size_t>(frames));
  for (int f = 0; f < frames; ++f) masks.push_back(roi_mask(rois, f, height, width));
  return masks;
}

double luma_at(const Frame& f, int y, int x) {
  return kLumaR * f.rgb[0](y, x) + kLumaG * f.rgb[1](y, x) + kLumaB * f.rgb[2](y, x);
}

CellStats cell_stats(const VideoClip* orig, const ReconClip& recon, const RoiSet& rois, const std::vector<Mask>& masks,
                     const LatentCell& cell, const CodecProfile& profile) {
  CellStats st;
  double so = 0, sr = 0, sor = 0, srr = 0;
  for_each_region_pixel(rois, masks, cell, recon.num_frames(), profile, [&](int f, int y, int x) {
    const Frame& r = recon.frames[static_cast<std::size_t>(f)];
    const double lr = luma_at(r, y, x);
    sr += lr;
    srr += lr * lr;
    if (orig != nullptr) {
      const Frame& o = orig->frames[static_cast<std::size_t>(f)];
      for (int c = 0; c < 3; ++c) st.delta[static_cast<std::size_t>(c)] += double(o.rgb[c](y, x)) - r.rgb[c](y, x);
      const double lo = luma_at(o, y, x);
      so += lo;
      sor += lo * lr;
    }
    st.count += 1;
  });
  if (st.count == 0) return st;
  for (auto& d : st.delta) d /= st.count;
  st.recon_luma_mean = sr / st.count;
  const double var_r = srr / st.count - st.recon_luma_mean * st.recon_luma_mean;
  if (orig != nullptr && var_r > kMinLumaVariance) {
    const double cov = sor / st.count - (so / st.count) * st.recon_luma_mean;
    st.gain = cov / var_r;
  }
  return st;
}

}  // namespace

const AuxBranch& visual_branch(std::uint8_t task_id) {
  switch (task_id) {
    case kTaskDetection: return kDetAux;
    case kTaskSegmentation: return kSegAux;
    case kTaskDepth: return kDepthAux;
    default: throw std::domain_error("no visual residual branch for task " + std::to_string(task_id));
  }
}

const FsqSpec& aux_fsq_spec() {
  static const FsqSpec spec({8, 8, 8, 8});
  return spec;
}

Eigen::Vector4d residual_feature(const VideoClip& orig, const ReconClip& recon, const RoiSet& rois,
                                 const LatentCell& cell, const AuxBranch& branch, const CodecProfile& profile) {
  check_same_shape(orig, recon);
  const auto masks = frame_masks(rois, recon.num_frames(), recon.height(), recon.width());
  const CellStats st = cell_stats(&orig, recon, rois, masks, cell, profile);
  Eigen::Vector4d v;
  for (int c = 0; c < 3; ++c) {
    v[c] = std::clamp(st.delta[static_cast<std::size_t>(c)] * branch.residual_gain / 255.0 + kCenterOffset, -1.0, 1.0);
  }
  v[3] = std::clamp(std::log2(std::max(st.gain, kMinGain)) / 2.0 + kCenterOffset, -1.0, 1.0);
  return v;
}

AuxVisualStream encode_aux(const VideoClip& orig, const ReconClip& recon, const RoiSet& rois,
                           const AuxBranch& branch, const CodecProfile& profile) {
  check_same_shape(orig, recon);
  const LatentDims dims = latent_shape(recon.num_frames(), recon.height(), recon.width(), profile);
  const auto cells = roi_cells(rois, dims, profile);
  const auto masks = frame_masks(rois, recon.num_frames(), recon.height(), recon.width());
  const FsqSpec& spec = aux_fsq_spec();

  AuxVisualStream out;
  out.stage = branch.stage;
  out.task_id = branch.task_id;
  out.codes.reserve(cells.size());
  for (const LatentCell& cell : cells) {
    const CellStats st = cell_stats(&orig, recon, rois, masks, cell, profile);
    Eigen::Vector4d v;
    for (int c = 0; c < 3; ++c) {
      v[c] = st.delta[static_cast<std::size_t>(c)] * branch.residual_gain / 255.0 + kCenterOffset;
    }
    v[3] = std::log2(std::max(st.gain, kMinGain)) / 2.0 + kCenterOffset;
    out.codes.push_back(static_cast<std::uint16_t>(index_of(quantize(v, spec), spec)));
  }
  return out;
}

ReconClip decode_aux(const AuxVisualStream& stream, const ReconClip& recon, const RoiSet& rois,
                     const CodecProfile& profile) {
  const LatentDims dims = latent_shape(recon.num_frames(), recon.height(), recon.width(), profile);
  const auto cells = roi_cells(rois, dims, profile);
  if (cells.size() != stream.codes.size()) {
    throw StructuralError("stage-" + std::to_string(stream.stage) + " visual stream (task " +
                          std::to_string(stream.task_id) + ") carries " + std::to_string(stream.codes.size()) +
                          " cells but the derived ROI set covers " + std::to_string(cells.size()));
  }
  const AuxBranch& branch = visual_branch(stream.task_id);
  const auto masks = frame_masks(rois, recon.num_frames(), recon.height(), recon.width());
  const FsqSpec& spec = aux_fsq_spec();

  ReconClip out = recon;
  for (std::size_t k = 0; k < cells.size(); ++k) {
    if (stream.codes[k] >= spec.codebook_size()) throw StructuralError("visual residual code out of range");
    const Eigen::Vector4d q = dequantize(code_of(stream.codes[k], spec), spec);
    std::array<double, 3> delta{};
    for (int c = 0; c < 3; ++c) delta[static_cast<std::size_t>(c)] = (q[c] - kCenterOffset) * 255.0 / branch.residual_gain;
    const double gain = std::exp2(2.0 * (q[3] - kCenterOffset));
    const CellStats st = cell_stats(nullptr, recon, rois, masks, cells[k], profile);
    for_each_region_pixel(rois, masks, cells[k], recon.num_frames(), profile, [&](int f, int y, int x) {
      const Frame& r = recon.frames[static_cast<std::size_t>(f)];
      Frame& o = out.frames[static_cast<std::size_t>(f)];
      const double shift = (gain - 1.0) * (luma_at(r, y, x) - st.recon_luma_mean);
      for (int c = 0; c < 3; ++c) {
        const double v = r.rgb[c](y, x) + delta[static_cast<std::size_t>(c)] + shift;
        o.rgb[c](y, x) = static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
      }
    });
  }
  return out;
}

std::uint64_t aux_bits(const AuxVisualStream& stream) {
  return static_cast<std::uint64_t>(stream.codes.size()) * kAuxCodeBits;
}

BitPayload pack_aux(const AuxVisualStream& stream) {
  BitWriter w;
  for (std::uint16_t c : stream.codes) w.write(c, kAuxCodeBits);
  return std::move(w).finish();
}

AuxVisualStream unpack_aux(const BitPayload& payload, int stage, std::uint8_t task_id) {
  if (payload.bits % kAuxCodeBits != 0) {
    throw StructuralError("visual residual payload of " + std::to_string(payload.bits) +
                          " bits is not a whole number of 12-bit codes");
  }
  AuxVisualStream s;
  s.stage = stage;
  s.task_id = task_id;
  BitReader r(payload);
  s.codes.resize(payload.bits / kAuxCodeBits);
  for (auto& c : s.codes) c = static_cast<std::uint16_t>(r.read(kAuxCodeBits));
  return s;
}

ChainResult chain(std::span<const AuxVisualStream> streams, const ReconClip& recon0, const TaskModel& detector,
                  const CodecProfile& profile) {
  if (streams.empty()) throw std::domain_error("chain: at least the stage-1 stream is required");
  ChainResult out;
  out.stage1 = select_stage1(detect_clip(detector, recon0), recon0.width(), recon0.height());
  out.det_refined = decode_aux(streams[0], recon0, out.stage1, profile);
  if (streams.size() == 1) return out;
  out.stage2 = select_stage2(detect_clip(detector, out.det_refined), recon0.width(), recon0.height());
  for (std::size_t k = 1; k < streams.size(); ++k) {
    out.task_refined.push_back(decode_aux(streams[k], out.det_refined, out.stage2, profile));
  }
  return out;
}

}  // namespace patvcm
