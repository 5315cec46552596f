#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "patvcm/bitio.hpp"
#include "patvcm/image.hpp"
#include "patvcm/task_model.hpp"

namespace patvcm {

inline constexpr int kPromptGrid = 6;
inline constexpr int kPromptCodebookSize = 32;
inline constexpr unsigned kPromptIndexBits = 5;

// Cell (row, col) of the 6x6 grid; the four corners are absent and the rest
// are numbered row-major.
struct PromptCell {
  int row = 0;
  int col = 0;
  double u() const { return (col + 0.5) / kPromptGrid; }
  double v() const { return (row + 0.5) / kPromptGrid; }
};

const std::array<PromptCell, kPromptCodebookSize>& prompt_codebook();

// Cell center mapped into the box, rounded half-up to a pixel. Always inside.
// Throws std::domain_error for indices outside [0, 32).
Point point_of(int index, const Box& box);

struct PromptToken {
  int index = 0;
  std::optional<int> bg_index;

  unsigned content_bits() const { return bg_index ? 2 * kPromptIndexBits : kPromptIndexBits; }
  bool operator==(const PromptToken&) const = default;
};

std::vector<PromptPoint> prompt_points(const PromptToken& token, const Box& box);

struct PromptSearch {
  PromptToken token;
  double iou = 0.0;
  bool degenerate = false;  // empty target: center fallback, no search
};

// Index of the candidate nearest the box center (lowest index on ties).
int center_candidate();

// Exhaustive search over all 32 candidates for the point whose single-point
// segmentation on `frame` best matches `target`. Ties go to the lower index.
PromptSearch select_fg(const Frame& frame, const Box& box, const Mask& target, const TaskModel& segmentor);

// Second, negative point chosen with the foreground point held fixed.
PromptSearch select_bg(const Frame& frame, const Box& box, const Mask& target, const TaskModel& segmentor,
                       const PromptToken& fg);

// Per ROI: a format bit (0 single, 1 pair) followed by 5 or 10 index bits.
BitPayload pack_prompts(std::span<const PromptToken> tokens);
std::vector<PromptToken> unpack_prompts(const BitPayload& payload, std::size_t roi_count);

}  // namespace patvcm
