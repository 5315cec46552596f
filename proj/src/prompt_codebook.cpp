#include "patvcm/prompt_codebook.hpp"

#include <stdexcept>
#include <string>

#include "patvcm/errors.hpp"
#include "patvcm/metrics.hpp"

namespace patvcm {
namespace {

bool is_corner(int r, int c) {
  const int last = kPromptGrid - 1;
  return (r == 0 || r == last) && (c == 0 || c == last);
}

// floor(x0 + (2c+1) * w / 12 + 1/2) in integers.
int grid_coord(int origin, int extent, int cell) {
  const long num = static_cast<long>(2 * cell + 1) * extent + kPromptGrid;
  return origin + static_cast<int>(num / (2 * kPromptGrid));
}

double search_iou(const Frame& frame, const Box& box, const Mask& target, const TaskModel& segmentor,
                  std::span<const PromptPoint> pts) {
  return mask_iou(segmentor.segment(frame, box, pts), target);
}

}  // namespace

const std::array<PromptCell, kPromptCodebookSize>& prompt_codebook() {
  static const auto book = [] {
    std::array<PromptCell, kPromptCodebookSize> b{};
    std::size_t n = 0;
    for (int r = 0; r < kPromptGrid; ++r) {
      for (int c = 0; c < kPromptGrid; ++c) {
        if (!is_corner(r, c)) b[n++] = {r, c};
      }
    }
    return b;
  }();
  return book;
}

Point point_of(int index, const Box& box) {
  if (index < 0 || index >= kPromptCodebookSize) {
    throw std::domain_error("prompt index " + std::to_string(index) + " outside [0, 32)");
  }
  if (box.w < 1 || box.h < 1) throw std::domain_error("prompt box must be non-empty");
  const PromptCell& cell = prompt_codebook()[static_cast<std::size_t>(index)];
  Point p{grid_coord(box.x0, box.w, cell.col), grid_coord(box.y0, box.h, cell.row)};
  p.x = std::clamp(p.x, box.x0, box.x1() - 1);
  p.y = std::clamp(p.y, box.y0, box.y1() - 1);
  return p;
}

std::vector<PromptPoint> prompt_points(const PromptToken& token, const Box& box) {
  std::vector<PromptPoint> pts{{point_of(token.index, box), true}};
  if (token.bg_index) pts.push_back({point_of(*token.bg_index, box), false});
  return pts;
}

int center_candidate() {
  int best = 0;
  double best_d = 1e9;
  for (int i = 0; i < kPromptCodebookSize; ++i) {
    const PromptCell& c = prompt_codebook()[static_cast<std::size_t>(i)];
    const double d = (c.u() - 0.5) * (c.u() - 0.5) + (c.v() - 0.5) * (c.v() - 0.5);
    if (d < best_d - 1e-12) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

PromptSearch select_fg(const Frame& frame, const Box& box, const Mask& target, const TaskModel& segmentor) {
  PromptSearch out;
  if (!target.any()) {
    out.token.index = center_candidate();
    out.degenerate = true;
    return out;
  }
  out.iou = -1.0;
  for (int i = 0; i < kPromptCodebookSize; ++i) {
    const PromptPoint pt{point_of(i, box), true};
    const double iou = search_iou(frame, box, target, segmentor, std::span(&pt, 1));
    if (iou > out.iou) {
      out.iou = iou;
      out.token.index = i;
    }
  }
  return out;
}

PromptSearch select_bg(const Frame& frame, const Box& box, const Mask& target, const TaskModel& segmentor,
                       const PromptToken& fg) {
  PromptSearch out;
  out.token.index = fg.index;
  if (!target.any()) {
    out.token.bg_index = fg.index == 0 ? 1 : 0;
    out.degenerate = true;
    return out;
  }
  out.iou = -1.0;
  for (int i = 0; i < kPromptCodebookSize; ++i) {
    if (i == fg.index) continue;
    const std::array<PromptPoint, 2> pts{PromptPoint{point_of(fg.index, box), true},
                                         PromptPoint{point_of(i, box), false}};
    const double iou = search_iou(frame, box, target, segmentor, pts);
    if (iou > out.iou) {
      out.iou = iou;
      out.token.bg_index = i;
    }
  }
  return out;
}

BitPayload pack_prompts(std::span<const PromptToken> tokens) {
  BitWriter w;
  for (const PromptToken& t : tokens) {
    if (t.index < 0 || t.index >= kPromptCodebookSize) throw std::domain_error("prompt index out of range");
    w.write_bit(t.bg_index.has_value());
    w.write(static_cast<std::uint64_t>(t.index), kPromptIndexBits);
    if (t.bg_index) {
      if (*t.bg_index < 0 || *t.bg_index >= kPromptCodebookSize || *t.bg_index == t.index) {
        throw std::domain_error("background prompt index invalid");
      }
      w.write(static_cast<std::uint64_t>(*t.bg_index), kPromptIndexBits);
    }
  }
  return std::move(w).finish();
}

std::vector<PromptToken> unpack_prompts(const BitPayload& payload, std::size_t roi_count) {
  BitReader r(payload);
  std::vector<PromptToken> out(roi_count);
  for (PromptToken& t : out) {
    const bool pair = r.read_bit();
    t.index = static_cast<int>(r.read(kPromptIndexBits));
    if (pair) t.bg_index = static_cast<int>(r.read(kPromptIndexBits));
  }
  if (r.remaining() != 0) {
    throw StructuralError("prompt record has " + std::to_string(r.remaining()) + " bits beyond " +
                          std::to_string(roi_count) + " ROIs");
  }
  return out;
}

}  // namespace patvcm
