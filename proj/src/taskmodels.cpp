#include "patvcm/taskmodels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "patvcm/prompt_codebook.hpp"
#include "patvcm/semantic_tokens.hpp"

namespace patvcm {
namespace {

const std::vector<std::string> kCocoNames = {
    "person",        "bicycle",      "car",           "motorcycle",    "airplane",     "bus",
    "train",         "truck",        "boat",          "traffic light", "fire hydrant", "stop sign",
    "parking meter", "bench",        "bird",          "cat",           "dog",          "horse",
    "sheep",         "cow",          "elephant",      "bear",          "zebra",        "giraffe",
    "backpack",      "umbrella",     "handbag",       "tie",           "suitcase",     "frisbee",
    "skis",          "snowboard",    "sports ball",   "kite",          "baseball bat", "baseball glove",
    "skateboard",    "surfboard",    "tennis racket", "bottle",        "wine glass",   "cup",
    "fork",          "knife",        "spoon",         "bowl",          "banana",       "apple",
    "sandwich",      "orange",       "broccoli",      "carrot",        "hot dog",      "pizza",
    "donut",         "cake",         "chair",         "couch",         "potted plant", "bed",
    "dining table",  "toilet",       "tv",            "laptop",        "mouse",        "remote",
    "keyboard",      "cell phone",   "microwave",     "oven",          "toaster",      "sink",
    "refrigerator",  "book",         "clock",         "vase",          "scissors",     "teddy bear",
    "hair drier",    "toothbrush"};

struct Component {
  long area = 0;
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // inclusive-exclusive bbox
  double sum = 0.0;
  std::vector<std::pair<int, int>> pixels;
};

// 4-connected components of `m` restricted to `region`, in raster order of
// their first pixel. `weight` is summed per component.
template <typename Weight>
std::vector<Component> components(const Mask& m, const Box& region, const Weight& weight, bool keep_pixels) {
  const int x0 = std::max(0, region.x0), y0 = std::max(0, region.y0);
  const int x1 = std::min(static_cast<int>(m.cols()), region.x1());
  const int y1 = std::min(static_cast<int>(m.rows()), region.y1());
  Mask seen = Mask::Constant(m.rows(), m.cols(), false);
  std::vector<Component> out;
  std::vector<std::pair<int, int>> stack;
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) {
      if (!m(y, x) || seen(y, x)) continue;
      Component c;
      c.x0 = c.x1 = x;
      c.y0 = c.y1 = y;
      stack.assign(1, {y, x});
      seen(y, x) = true;
      while (!stack.empty()) {
        const auto [cy, cx] = stack.back();
        stack.pop_back();
        ++c.area;
        c.sum += weight(cy, cx);
        c.x0 = std::min(c.x0, cx);
        c.x1 = std::max(c.x1, cx);
        c.y0 = std::min(c.y0, cy);
        c.y1 = std::max(c.y1, cy);
        if (keep_pixels) c.pixels.emplace_back(cy, cx);
        const std::array<std::pair<int, int>, 4> nb{{{cy - 1, cx}, {cy + 1, cx}, {cy, cx - 1}, {cy, cx + 1}}};
        for (const auto& [ny, nx] : nb) {
          if (ny < y0 || ny >= y1 || nx < x0 || nx >= x1) continue;
          if (!m(ny, nx) || seen(ny, nx)) continue;
          seen(ny, nx) = true;
          stack.emplace_back(ny, nx);
        }
      }
      c.x1 += 1;
      c.y1 += 1;
      out.push_back(std::move(c));
    }
  }
  return out;
}

Box clip_box(const Box& b, int width, int height) {
  Box o = b;
  o.x0 = std::clamp(b.x0, 0, width);
  o.y0 = std::clamp(b.y0, 0, height);
  o.w = std::clamp(b.x1(), 0, width) - o.x0;
  o.h = std::clamp(b.y1(), 0, height) - o.y0;
  return o;
}

double sq(double v) { return v * v; }

Eigen::Vector3d mean_color(const Frame& f, const Mask& m) {
  Eigen::Vector3d s = Eigen::Vector3d::Zero();
  long n = 0;
  for (int y = 0; y < m.rows(); ++y) {
    for (int x = 0; x < m.cols(); ++x) {
      if (!m(y, x)) continue;
      for (int c = 0; c < 3; ++c) s[c] += f.rgb[c](y, x);
      ++n;
    }
  }
  return n > 0 ? Eigen::Vector3d(s / static_cast<double>(n)) : s;
}

}  // namespace

const std::vector<Rgb>& class_palette() {
  static const std::vector<Rgb> palette = [] {
    std::vector<Eigen::Vector3d> cand;
    for (int r = 40; r <= 215; r += 5) {
      for (int g = 40; g <= 215; g += 5) {
        for (int b = 40; b <= 215; b += 5) cand.emplace_back(r, g, b);
      }
    }
    std::vector<double> dist(cand.size(), std::numeric_limits<double>::infinity());
    std::vector<Rgb> out;
    Eigen::Vector3d next(215, 40, 40);
    while (out.size() < static_cast<std::size_t>(kNumClasses)) {
      out.push_back({static_cast<std::uint8_t>(next[0]), static_cast<std::uint8_t>(next[1]),
                     static_cast<std::uint8_t>(next[2])});
      std::size_t best = 0;
      for (std::size_t i = 0; i < cand.size(); ++i) {
        dist[i] = std::min(dist[i], (cand[i] - next).squaredNorm());
        if (dist[i] > dist[best]) best = i;
      }
      next = cand[best];
    }
    return out;
  }();
  return palette;
}

const std::vector<std::string>& class_names() { return kCocoNames; }

int class_of_name(const std::string& name) {
  const auto it = std::find(kCocoNames.begin(), kCocoNames.end(), name);
  return it == kCocoNames.end() ? -1 : static_cast<int>(it - kCocoNames.begin());
}

int nearest_palette_class(const Eigen::Vector3d& color) {
  const auto& pal = class_palette();
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < pal.size(); ++k) {
    const double d = sq(color[0] - pal[k][0]) + sq(color[1] - pal[k][1]) + sq(color[2] - pal[k][2]);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(k);
    }
  }
  return best;
}

std::string class_caption(int class_id) { return "a " + kCocoNames.at(static_cast<std::size_t>(class_id)); }

int class_of_caption(const std::string& caption) {
  if (caption.rfind("a ", 0) != 0) return -1;
  return class_of_name(caption.substr(2));
}

const std::array<Keypoint, 17>& skeleton_layout() {
  // nose, eyes, ears, shoulders, elbows, wrists, hips, knees, ankles; "left"
  // is the figure's left, which appears on the image right.
  static const std::array<Keypoint, 17> layout{{{0.50, 0.10},
                                                {0.54, 0.07},
                                                {0.46, 0.07},
                                                {0.58, 0.09},
                                                {0.42, 0.09},
                                                {0.66, 0.24},
                                                {0.34, 0.24},
                                                {0.80, 0.40},
                                                {0.20, 0.40},
                                                {0.90, 0.55},
                                                {0.10, 0.55},
                                                {0.60, 0.56},
                                                {0.40, 0.56},
                                                {0.62, 0.76},
                                                {0.38, 0.76},
                                                {0.64, 0.94},
                                                {0.36, 0.94}}};
  return layout;
}

std::vector<Keypoint> skeleton_in_box(const Box& box) {
  std::vector<Keypoint> out;
  out.reserve(17);
  for (const Keypoint& k : skeleton_layout()) out.push_back({box.x0 + k.x * box.w, box.y0 + k.y * box.h});
  return out;
}

BackgroundModel estimate_background(const Frame& frame) {
  const int h = frame.height(), w = frame.width();
  const int ring = std::min({kBackgroundRing, h, w});
  std::vector<std::pair<int, int>> px;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (y < ring || y >= h - ring || x < ring || x >= w - ring) px.emplace_back(y, x);
    }
  }
  Eigen::MatrixXd a(static_cast<Eigen::Index>(px.size()), 3);
  Eigen::MatrixXd b(static_cast<Eigen::Index>(px.size()), 3);
  for (std::size_t k = 0; k < px.size(); ++k) {
    const auto [y, x] = px[k];
    const auto r = static_cast<Eigen::Index>(k);
    a.row(r) << 1.0, x + 0.5, y + 0.5;
    for (int c = 0; c < 3; ++c) b(r, c) = frame.rgb[c](y, x);
  }
  BackgroundModel m;
  m.coeff = a.colPivHouseholderQr().solve(b).transpose();
  return m;
}

Grid<double> contrast_map(const Frame& frame, const BackgroundModel& bg) {
  const int h = frame.height(), w = frame.width();
  Grid<double> out(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double m = 0;
      for (int c = 0; c < 3; ++c) m = std::max(m, std::abs(frame.rgb[c](y, x) - bg.at(c, x + 0.5, y + 0.5)));
      out(y, x) = m;
    }
  }
  return out;
}

FrameDetections ToyTaskModel::detect(const Frame& frame) const {
  const Grid<double> contrast = contrast_map(frame, estimate_background(frame));
  const Mask fg = contrast > params_.detect_threshold;
  const Box all{0, 0, frame.width(), frame.height()};
  FrameDetections out;
  for (const Component& c : components(fg, all, [&](int y, int x) { return contrast(y, x); }, false)) {
    if (c.area < params_.min_area) continue;
    out.push_back(Box{c.x0, c.y0, c.x1 - c.x0, c.y1 - c.y0, c.sum / static_cast<double>(c.area) / 255.0});
  }
  std::sort(out.begin(), out.end(), [](const Box& a, const Box& b) {
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    if (a.y0 != b.y0) return a.y0 < b.y0;
    return a.x0 < b.x0;
  });
  return out;
}

Mask ToyTaskModel::grow(const Frame& frame, const Box& box, Point seed) const {
  const Box b = clip_box(box, frame.width(), frame.height());
  if (!b.contains(seed.x, seed.y)) throw std::domain_error("segment seed lies outside the box");
  std::array<int, 3> ref{};
  for (int c = 0; c < 3; ++c) ref[static_cast<std::size_t>(c)] = frame.rgb[c](seed.y, seed.x);
  auto accept = [&](int y, int x) {
    for (int c = 0; c < 3; ++c) {
      if (std::abs(frame.rgb[c](y, x) - ref[static_cast<std::size_t>(c)]) > params_.segment_tolerance) return false;
    }
    return true;
  };
  Mask out = Mask::Constant(frame.height(), frame.width(), false);
  std::vector<Point> stack{seed};
  out(seed.y, seed.x) = true;
  while (!stack.empty()) {
    const Point p = stack.back();
    stack.pop_back();
    const std::array<Point, 4> nb{{{p.x, p.y - 1}, {p.x, p.y + 1}, {p.x - 1, p.y}, {p.x + 1, p.y}}};
    for (const Point& q : nb) {
      if (!b.contains(q.x, q.y) || out(q.y, q.x) || !accept(q.y, q.x)) continue;
      out(q.y, q.x) = true;
      stack.push_back(q);
    }
  }
  return out;
}

Mask ToyTaskModel::segment(const Frame& frame, const Box& box, std::span<const PromptPoint> points) const {
  Mask out = Mask::Constant(frame.height(), frame.width(), false);
  bool any_positive = false;
  for (const PromptPoint& p : points) {
    if (!p.positive) continue;
    out = out || grow(frame, box, p.at);
    any_positive = true;
  }
  if (!any_positive) out = grow(frame, box, Point{box.x0 + box.w / 2, box.y0 + box.h / 2});
  for (const PromptPoint& p : points) {
    if (p.positive) continue;
    out = out && !grow(frame, box, p.at);
  }
  return out;
}

Mask ToyTaskModel::segment_with_caption(const Frame& frame, const Box& box, const std::string& caption) const {
  const int cls = class_of_caption(caption);
  if (cls < 0) return segment(frame, box, {});
  const Rgb& target = class_palette()[static_cast<std::size_t>(cls)];
  const Box b = clip_box(box, frame.width(), frame.height());
  const long min_area = std::max<long>(1, b.area() / 100);

  std::vector<Point> seeds{{b.x0 + b.w / 2, b.y0 + b.h / 2}};
  for (int i = 0; i < kPromptCodebookSize; ++i) seeds.push_back(point_of(i, b));

  Mask covered = Mask::Constant(frame.height(), frame.width(), false);
  Mask best;
  double best_d = std::numeric_limits<double>::infinity();
  for (const Point& s : seeds) {
    if (covered(s.y, s.x)) continue;
    Mask m = grow(frame, b, s);
    covered = covered || m;
    if (m.count() < min_area) continue;
    const Eigen::Vector3d mc = mean_color(frame, m);
    const double d = sq(mc[0] - target[0]) + sq(mc[1] - target[1]) + sq(mc[2] - target[2]);
    if (d < best_d) {
      best_d = d;
      best = std::move(m);
    }
  }
  return best.size() > 0 ? best : segment(frame, box, {});
}

DepthMap ToyTaskModel::depth(const Frame& frame) const { return (luminance<double>(frame) / 255.0).cast<float>(); }

Mask ToyTaskModel::foreground(const Frame& frame, const Box& box) const {
  const Grid<double> contrast = contrast_map(frame, estimate_background(frame));
  const Mask fg = contrast > params_.detect_threshold;
  const Box b = clip_box(box, frame.width(), frame.height());
  auto comps = components(fg, b, [](int, int) { return 0.0; }, true);
  Mask out = Mask::Constant(frame.height(), frame.width(), false);
  const Component* best = nullptr;
  for (const Component& c : comps) {
    if (best == nullptr || c.area > best->area) best = &c;
  }
  if (best != nullptr) {
    for (const auto& [y, x] : best->pixels) out(y, x) = true;
  }
  return out;
}

int ToyTaskModel::classify(const Frame& frame, const Box& box) const {
  Mask m = foreground(frame, box);
  if (!m.any()) {
    const Box b = clip_box(box, frame.width(), frame.height());
    m.block(b.y0, b.x0, b.h, b.w).setConstant(true);
  }
  return nearest_palette_class(mean_color(frame, m));
}

std::vector<Keypoint> ToyTaskModel::pose(const Frame& frame, const Box& box) const {
  const Mask m = foreground(frame, box);
  if (!m.any()) return skeleton_in_box(box);
  int x0 = frame.width(), y0 = frame.height(), x1 = 0, y1 = 0;
  for (int y = 0; y < m.rows(); ++y) {
    for (int x = 0; x < m.cols(); ++x) {
      if (!m(y, x)) continue;
      x0 = std::min(x0, x);
      y0 = std::min(y0, y);
      x1 = std::max(x1, x + 1);
      y1 = std::max(y1, y + 1);
    }
  }
  return skeleton_in_box(Box{x0, y0, x1 - x0, y1 - y0});
}

std::string ToyTaskModel::caption(const Frame& frame, const Box& box) const {
  return class_caption(classify(frame, box));
}

ClipDetections detect_clip(const TaskModel& model, const VideoClip& clip) {
  ClipDetections out;
  out.reserve(clip.frames.size());
  for (const Frame& f : clip.frames) out.push_back(model.detect(f));
  return out;
}

}  // namespace patvcm
