#include "patvcm/roi.hpp"

#include <algorithm>
#include <bit>
#include <cstring>

namespace patvcm {
namespace {

long floor_div(long a, long b) {
  long q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

long ceil_div(long a, long b) { return -floor_div(-a, b); }

}  // namespace

std::size_t RoiSet::total() const {
  std::size_t n = 0;
  for (const auto& f : frames) n += f.size();
  return n;
}

bool roi_order(const Box& a, const Box& b) {
  if (a.confidence != b.confidence) return a.confidence > b.confidence;
  if (a.y0 != b.y0) return a.y0 < b.y0;
  if (a.x0 != b.x0) return a.x0 < b.x0;
  if (a.w != b.w) return a.w < b.w;
  return a.h < b.h;
}

Box expand_box(const Box& b, ExpansionFactor factor, int frame_width, int frame_height) {
  // In units of 1 / (2 * den): center = 2*x0 + w (times den), half extent = w * num.
  const long d2 = 2L * factor.den;
  const long cx = (2L * b.x0 + b.w) * factor.den;
  const long cy = (2L * b.y0 + b.h) * factor.den;
  const long hx = static_cast<long>(b.w) * factor.num;
  const long hy = static_cast<long>(b.h) * factor.num;
  long x0 = floor_div(cx - hx, d2);
  long x1 = ceil_div(cx + hx, d2);
  long y0 = floor_div(cy - hy, d2);
  long y1 = ceil_div(cy + hy, d2);
  x0 = std::clamp<long>(x0, 0, frame_width);
  x1 = std::clamp<long>(x1, 0, frame_width);
  y0 = std::clamp<long>(y0, 0, frame_height);
  y1 = std::clamp<long>(y1, 0, frame_height);
  Box out = b;
  out.x0 = static_cast<int>(x0);
  out.y0 = static_cast<int>(y0);
  out.w = static_cast<int>(std::max<long>(1, x1 - x0));
  out.h = static_cast<int>(std::max<long>(1, y1 - y0));
  if (out.x0 + out.w > frame_width) out.x0 = frame_width - out.w;
  if (out.y0 + out.h > frame_height) out.y0 = frame_height - out.h;
  return out;
}

RoiSet select_rois(const ClipDetections& dets, const RoiRule& rule, int stage, int frame_width, int frame_height) {
  RoiSet out;
  out.stage = stage;
  out.frames.resize(dets.size());
  for (std::size_t f = 0; f < dets.size(); ++f) {
    std::vector<Box> kept;
    for (const Box& b : dets[f]) {
      if (b.confidence >= rule.min_confidence && b.confidence < rule.max_confidence) kept.push_back(b);
    }
    std::sort(kept.begin(), kept.end(), roi_order);
    if (kept.size() > static_cast<std::size_t>(rule.max_boxes)) kept.resize(static_cast<std::size_t>(rule.max_boxes));
    for (const Box& b : kept) {
      out.frames[f].push_back(Roi{expand_box(b, rule.expansion, frame_width, frame_height), b});
    }
  }
  return out;
}

RoiSet select_stage1(const ClipDetections& dets, int frame_width, int frame_height) {
  return select_rois(dets, kStage1Rule, 1, frame_width, frame_height);
}

RoiSet select_stage2(const ClipDetections& dets, int frame_width, int frame_height) {
  return select_rois(dets, kStage2Rule, 2, frame_width, frame_height);
}

std::vector<LatentCell> roi_cells(const RoiSet& rois, const LatentDims& dims, const CodecProfile& profile) {
  const int s = profile.spatial_factor;
  std::vector<LatentCell> cells;
  for (std::size_t f = 0; f < rois.frames.size(); ++f) {
    const int t = group_of_frame(static_cast<int>(f), profile);
    if (t >= dims.t) continue;
    for (const Roi& r : rois.frames[f]) {
      const Box& b = r.box;
      if (b.w <= 0 || b.h <= 0) continue;
      const int i0 = std::max(0, b.y0 / s);
      const int i1 = std::min(dims.h - 1, (b.y1() - 1) / s);
      const int j0 = std::max(0, b.x0 / s);
      const int j1 = std::min(dims.w - 1, (b.x1() - 1) / s);
      for (int i = i0; i <= i1; ++i) {
        for (int j = j0; j <= j1; ++j) cells.push_back({t, i, j});
      }
    }
  }
  std::sort(cells.begin(), cells.end());
  cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
  return cells;
}

Mask roi_mask(const RoiSet& rois, int frame, int height, int width) {
  Mask m = Mask::Constant(height, width, false);
  if (frame < 0 || static_cast<std::size_t>(frame) >= rois.frames.size()) return m;
  for (const Roi& r : rois.frames[static_cast<std::size_t>(frame)]) {
    const Box& b = r.box;
    const int x0 = std::clamp(b.x0, 0, width);
    const int y0 = std::clamp(b.y0, 0, height);
    const int x1 = std::clamp(b.x1(), 0, width);
    const int y1 = std::clamp(b.y1(), 0, height);
    if (x1 > x0 && y1 > y0) m.block(y0, x0, y1 - y0, x1 - x0).setConstant(true);
  }
  return m;
}

std::vector<std::uint8_t> serialize_roiset(const RoiSet& rois) {
  std::vector<std::uint8_t> out;
  auto put32 = [&out](std::uint32_t v) {
    for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(v >> s));
  };
  auto put_box = [&](const Box& b) {
    put32(static_cast<std::uint32_t>(b.x0));
    put32(static_cast<std::uint32_t>(b.y0));
    put32(static_cast<std::uint32_t>(b.w));
    put32(static_cast<std::uint32_t>(b.h));
    const auto bits = std::bit_cast<std::uint64_t>(b.confidence);
    put32(static_cast<std::uint32_t>(bits >> 32));
    put32(static_cast<std::uint32_t>(bits));
  };
  out.push_back(static_cast<std::uint8_t>(rois.stage));
  put32(static_cast<std::uint32_t>(rois.frames.size()));
  for (const auto& f : rois.frames) {
    put32(static_cast<std::uint32_t>(f.size()));
    for (const Roi& r : f) {
      put_box(r.box);
      put_box(r.detection);
    }
  }
  return out;
}

}  // namespace patvcm
