#include "patvcm/scene.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

#include "patvcm/semantic_tokens.hpp"

namespace patvcm {
namespace {

constexpr double kFigureAspect = 0.6;
constexpr double kDistractorFraction = 0.35;
constexpr int kDistractorMinHost = 48;
constexpr double kDistractorMinContrast = 60.0;
constexpr int kPlacementAttempts = 200;

// Portable draws from the raw engine output; std distributions are
// implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}
  double unit() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
  int between(int lo, int hi) { return lo + static_cast<int>(unit() * (hi - lo + 1)); }
  bool chance(double p) { return unit() < p; }

 private:
  std::mt19937_64 eng_;
};

Eigen::Vector3d bg_color(const Scene& s, double y) {
  const double a = std::clamp(y / s.params.height, 0.0, 1.0);
  Eigen::Vector3d c;
  for (int k = 0; k < 3; ++k) c[k] = s.bg_top[k] + (s.bg_bottom[k] - s.bg_top[k]) * a;
  return c;
}

double rgb_contrast(const Rgb& a, const Eigen::Vector3d& b) {
  double m = 0;
  for (int c = 0; c < 3; ++c) m = std::max(m, std::abs(a[c] - b[c]));
  return m;
}

double luma_of(const Rgb& c) { return kLumaR * c[0] + kLumaG * c[1] + kLumaB * c[2]; }

double seg_dist2(double px, double py, double ax, double ay, double bx, double by) {
  const double dx = bx - ax, dy = by - ay;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0 ? ((px - ax) * dx + (py - ay) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double ex = ax + t * dx - px, ey = ay + t * dy - py;
  return ex * ex + ey * ey;
}

// Pixel-center coverage in box-local coordinates (px, py from the box origin).
bool figure_covers(double px, double py, double w, double h) {
  const auto& k = skeleton_layout();
  auto at = [&](int i) { return std::pair<double, double>{k[static_cast<std::size_t>(i)].x * w,
                                                           k[static_cast<std::size_t>(i)].y * h}; };
  const double head_r = 0.1 * h;
  const double hx = 0.5 * w - px, hy = 0.1 * h - py;
  if (hx * hx + hy * hy <= head_r * head_r) return true;
  if (px >= 0.32 * w && px <= 0.68 * w && py >= 0.18 * h && py <= 0.60 * h) return true;
  const double arm_r2 = (0.1 * w) * (0.1 * w);
  const double leg_r2 = (0.06 * h) * (0.06 * h);
  // shoulder-elbow-wrist and hip-knee-ankle chains, both sides
  const int arms[2][3] = {{5, 7, 9}, {6, 8, 10}};
  const int legs[2][3] = {{11, 13, 15}, {12, 14, 16}};
  for (const auto& chain : arms) {
    for (int s = 0; s < 2; ++s) {
      const auto [ax, ay] = at(chain[s]);
      const auto [bx, by] = at(chain[s + 1]);
      if (seg_dist2(px, py, ax, ay, bx, by) <= arm_r2) return true;
    }
  }
  for (const auto& chain : legs) {
    for (int s = 0; s < 2; ++s) {
      const auto [ax, ay] = at(chain[s]);
      const auto [bx, by] = at(chain[s + 1]);
      if (seg_dist2(px, py, ax, ay, bx, by) <= leg_r2) return true;
    }
  }
  return false;
}

bool shape_covers(const Shape& s, const Box& b, int x, int y) {
  if (!b.contains(x, y)) return false;
  const double px = x + 0.5 - b.x0, py = y + 0.5 - b.y0;
  switch (s.kind) {
    case ShapeKind::Rect: return true;
    case ShapeKind::Ellipse: {
      const double a = b.w / 2.0, c = b.h / 2.0;
      const double u = (px - a) / a, v = (py - c) / c;
      return u * u + v * v <= 1.0;
    }
    case ShapeKind::Figure: return figure_covers(px, py, b.w, b.h);
  }
  return false;
}

std::array<double, 3> shade(const Shape& s, const Box& b, int x) {
  const double t = (x + 0.5 - b.x0 - b.w / 2.0) / (b.w / 2.0);
  const double d = s.shading * t;
  return {s.color[0] + d, s.color[1] - d * kLumaR / kLumaG, static_cast<double>(s.color[2])};
}

bool boxes_conflict(const Shape& a, const Shape& b, int frames, int gap) {
  for (int f = 0; f < frames; ++f) {
    const Box p = a.box_at(f), q = b.box_at(f);
    if (p.x0 < q.x1() + gap && q.x0 < p.x1() + gap && p.y0 < q.y1() + gap && q.y0 < p.y1() + gap) return true;
  }
  return false;
}

bool place(Rng& rng, const SceneParams& p, Shape& s) {
  const int span = p.frames - 1;
  const int xlo = p.margin + std::max(0, -s.vx * span), xhi = p.width - p.margin - s.w - std::max(0, s.vx * span);
  const int ylo = p.margin + std::max(0, -s.vy * span), yhi = p.height - p.margin - s.h - std::max(0, s.vy * span);
  if (xhi < xlo || yhi < ylo) return false;
  s.x0 = rng.between(xlo, xhi);
  s.y0 = rng.between(ylo, yhi);
  return true;
}

void validate(const SceneParams& p) {
  if (p.frames < 1 || p.height < 8 || p.width < 8) throw std::domain_error("scene: empty clip");
  if (p.min_objects < 0 || p.max_objects < p.min_objects) throw std::domain_error("scene: bad object count range");
  if (p.min_size < 4 || p.max_size < p.min_size) throw std::domain_error("scene: bad size range");
  if (p.max_size + 2 * p.margin > std::min(p.height, p.width)) {
    throw std::domain_error("scene: shapes larger than the frame");
  }
  if (p.min_contrast > p.max_contrast) throw std::domain_error("scene: bad contrast range");
}

}  // namespace

const char* shape_name(ShapeKind k) {
  switch (k) {
    case ShapeKind::Rect: return "rect";
    case ShapeKind::Ellipse: return "ellipse";
    case ShapeKind::Figure: return "figure";
  }
  return "?";
}

Scene make_scene(std::uint64_t seed, const SceneParams& params) {
  validate(params);
  Rng rng(seed);
  Scene s;
  s.seed = seed;
  s.params = params;
  const int top = 60 + rng.between(0, 30);
  const int bottom = 130 + rng.between(0, 30);
  s.bg_top = {static_cast<std::uint8_t>(top), static_cast<std::uint8_t>(top + 2), static_cast<std::uint8_t>(top + 8)};
  s.bg_bottom = {static_cast<std::uint8_t>(bottom + 6), static_cast<std::uint8_t>(bottom + 2),
                 static_cast<std::uint8_t>(bottom - 4)};

  const auto& pal = class_palette();
  const int count = rng.between(params.min_objects, params.max_objects);
  std::vector<Shape> top_level;
  for (int n = 0; n < count; ++n) {
    for (int attempt = 0; attempt < kPlacementAttempts; ++attempt) {
      Shape sh;
      const bool figure = rng.chance(params.figure_probability);
      sh.kind = figure ? ShapeKind::Figure : (rng.chance(0.5) ? ShapeKind::Rect : ShapeKind::Ellipse);
      sh.h = rng.between(params.min_size, params.max_size);
      sh.w = figure ? static_cast<int>(std::lround(kFigureAspect * sh.h)) : rng.between(params.min_size, params.max_size);
      sh.vx = rng.between(-1, 1);
      sh.vy = rng.between(-1, 1);
      if (!place(rng, params, sh)) continue;
      if (std::any_of(top_level.begin(), top_level.end(),
                      [&](const Shape& o) { return boxes_conflict(o, sh, params.frames, params.gap); })) {
        continue;
      }
      const Eigen::Vector3d bg = bg_color(s, sh.y0 + sh.h / 2.0);
      auto in_range = [&](int k) {
        const double c = rgb_contrast(pal[static_cast<std::size_t>(k)], bg);
        return c >= params.min_contrast && c <= params.max_contrast;
      };
      if (figure) {
        if (!in_range(0)) continue;
        sh.class_id = 0;
      } else {
        std::vector<int> ok;
        for (int k = 1; k < kNumClasses; ++k) {
          if (in_range(k)) ok.push_back(k);
        }
        if (ok.empty()) continue;
        sh.class_id = ok[static_cast<std::size_t>(rng.between(0, static_cast<int>(ok.size()) - 1))];
      }
      sh.color = pal[static_cast<std::size_t>(sh.class_id)];
      sh.shading = params.shading;
      top_level.push_back(sh);
      break;
    }
  }

  for (const Shape& host : top_level) {
    const int host_index = static_cast<int>(s.shapes.size());
    s.shapes.push_back(host);
    if (host.kind == ShapeKind::Figure || std::min(host.w, host.h) < kDistractorMinHost) continue;
    if (!rng.chance(params.distractor_probability)) continue;
    Shape d;
    d.kind = ShapeKind::Rect;
    d.w = d.h = static_cast<int>(std::lround(kDistractorFraction * std::min(host.w, host.h)));
    d.x0 = host.x0 + (host.w - d.w) / 2;
    d.y0 = host.y0 + (host.h - d.h) / 2;
    d.vx = host.vx;
    d.vy = host.vy;
    const Eigen::Vector3d hc(host.color[0], host.color[1], host.color[2]);
    std::vector<int> ok;
    for (int k = 1; k < kNumClasses; ++k) {
      if (k != host.class_id && rgb_contrast(pal[static_cast<std::size_t>(k)], hc) >= kDistractorMinContrast) ok.push_back(k);
    }
    d.class_id = ok[static_cast<std::size_t>(rng.between(0, static_cast<int>(ok.size()) - 1))];
    d.color = pal[static_cast<std::size_t>(d.class_id)];
    d.host = host_index;
    s.shapes.push_back(d);
  }

  for (std::size_t i = 0; i < s.shapes.size(); ++i) {
    Shape& sh = s.shapes[i];
    sh.caption = class_caption(sh.class_id);
    if (!params.captions_helpful_on_distractors_only || sh.host >= 0) continue;
    const bool carries = std::any_of(s.shapes.begin(), s.shapes.end(),
                                     [&](const Shape& o) { return o.host == static_cast<int>(i); });
    if (!carries) sh.caption = class_caption(nearest_palette_class(bg_color(s, sh.y0 + sh.h / 2.0)));
  }
  return s;
}

VideoClip render_clip(const Scene& s) {
  const SceneParams& p = s.params;
  VideoClip clip;
  clip.seed = s.seed;
  for (int f = 0; f < p.frames; ++f) {
    Frame fr(p.height, p.width);
    for (int y = 0; y < p.height; ++y) {
      const Eigen::Vector3d c = bg_color(s, y + 0.5);
      for (int k = 0; k < 3; ++k) fr.rgb[k].row(y).setConstant(static_cast<std::uint8_t>(std::lround(c[k])));
    }
    for (const Shape& sh : s.shapes) {
      const Box b = sh.box_at(f);
      for (int y = std::max(0, b.y0); y < std::min(p.height, b.y1()); ++y) {
        for (int x = std::max(0, b.x0); x < std::min(p.width, b.x1()); ++x) {
          if (!shape_covers(sh, b, x, y)) continue;
          const auto c = shade(sh, b, x);
          for (int k = 0; k < 3; ++k) {
            fr.rgb[k](y, x) = static_cast<std::uint8_t>(std::clamp(std::lround(c[static_cast<std::size_t>(k)]), 0L, 255L));
          }
        }
      }
    }
    clip.frames.push_back(std::move(fr));
  }
  return clip;
}

GroundTruth render_truth(const Scene& s) {
  const SceneParams& p = s.params;
  GroundTruth gt;
  for (const Shape& sh : s.shapes) {
    ObjectTruth o;
    o.kind = sh.kind;
    o.class_id = sh.class_id;
    o.caption = sh.caption;
    o.distractor = sh.host >= 0;
    gt.objects.push_back(std::move(o));
  }
  for (int f = 0; f < p.frames; ++f) {
    Grid<int> owner = Grid<int>::Constant(p.height, p.width, -1);
    for (std::size_t i = 0; i < s.shapes.size(); ++i) {
      const Shape& sh = s.shapes[i];
      const Box b = sh.box_at(f);
      for (int y = std::max(0, b.y0); y < std::min(p.height, b.y1()); ++y) {
        for (int x = std::max(0, b.x0); x < std::min(p.width, b.x1()); ++x) {
          if (shape_covers(sh, b, x, y)) owner(y, x) = static_cast<int>(i);
        }
      }
    }
    DepthMap depth(p.height, p.width);
    for (int y = 0; y < p.height; ++y) {
      const Eigen::Vector3d bg = bg_color(s, y + 0.5);
      const double bg_depth = depth_of_luma(kLumaR * bg[0] + kLumaG * bg[1] + kLumaB * bg[2]);
      for (int x = 0; x < p.width; ++x) {
        const int o = owner(y, x);
        depth(y, x) = static_cast<float>(o < 0 ? bg_depth : depth_of_luma(luma_of(s.shapes[static_cast<std::size_t>(o)].color)));
      }
    }
    gt.depth.push_back(std::move(depth));
    for (std::size_t i = 0; i < s.shapes.size(); ++i) {
      ObjectTruth& o = gt.objects[i];
      const Box b = s.shapes[i].box_at(f);
      o.boxes.push_back(b);
      o.masks.push_back(owner == static_cast<int>(i));
      if (o.kind == ShapeKind::Figure) o.keypoints.push_back(skeleton_in_box(b));
    }
  }
  return gt;
}

SceneSample generate_scene(std::uint64_t seed, const SceneParams& params) {
  const Scene s = make_scene(seed, params);
  return {render_clip(s), render_truth(s)};
}

int match_object(const GroundTruth& gt, int frame, const Box& detection) {
  int best = -1;
  double best_iou = 0.1;
  for (std::size_t i = 0; i < gt.objects.size(); ++i) {
    const ObjectTruth& o = gt.objects[i];
    if (o.distractor || static_cast<std::size_t>(frame) >= o.boxes.size()) continue;
    const double iou = box_iou(o.boxes[static_cast<std::size_t>(frame)], detection);
    if (iou >= best_iou) {
      if (iou == best_iou && best >= 0) continue;
      best_iou = iou;
      best = static_cast<int>(i);
    }
  }
  return best;
}

Mask crop_to_box(const Mask& m, const Box& box) {
  Mask out = Mask::Constant(m.rows(), m.cols(), false);
  const int x0 = std::clamp(box.x0, 0, static_cast<int>(m.cols()));
  const int y0 = std::clamp(box.y0, 0, static_cast<int>(m.rows()));
  const int x1 = std::clamp(box.x1(), 0, static_cast<int>(m.cols()));
  const int y1 = std::clamp(box.y1(), 0, static_cast<int>(m.rows()));
  if (x1 > x0 && y1 > y0) out.block(y0, x0, y1 - y0, x1 - x0) = m.block(y0, x0, y1 - y0, x1 - x0);
  return out;
}

Mask GroundTruthOracle::target_mask(int frame_index, const Frame& original, const Roi& roi) const {
  const int o = match_object(gt_, frame_index, roi.detection);
  if (o < 0) return Mask::Constant(original.height(), original.width(), false);
  return crop_to_box(gt_.objects[static_cast<std::size_t>(o)].masks[static_cast<std::size_t>(frame_index)], roi.box);
}

std::string GroundTruthOracle::caption(int frame_index, const Frame& original, const Roi& roi) const {
  const int o = match_object(gt_, frame_index, roi.detection);
  if (o < 0) return class_caption(ToyTaskModel().classify(original, roi.box));
  return gt_.objects[static_cast<std::size_t>(o)].caption;
}

int GroundTruthOracle::class_label(int frame_index, const Frame& original, const Roi& roi) const {
  const int o = match_object(gt_, frame_index, roi.detection);
  if (o < 0) return ToyTaskModel().classify(original, roi.box);
  return gt_.objects[static_cast<std::size_t>(o)].class_id;
}

std::vector<Keypoint> GroundTruthOracle::keypoints(int frame_index, const Frame& original, const Roi& roi) const {
  const int o = match_object(gt_, frame_index, roi.detection);
  if (o < 0 || gt_.objects[static_cast<std::size_t>(o)].keypoints.empty()) {
    return ToyTaskModel().pose(original, roi.box);
  }
  return gt_.objects[static_cast<std::size_t>(o)].keypoints[static_cast<std::size_t>(frame_index)];
}

Mask ModelOracle::target_mask(int, const Frame& original, const Roi& roi) const {
  return crop_to_box(model_.segment(original, roi.box, {}), roi.box);
}

std::string ModelOracle::caption(int, const Frame& original, const Roi& roi) const {
  return model_.caption(original, roi.box);
}

int ModelOracle::class_label(int, const Frame& original, const Roi& roi) const {
  return model_.classify(original, roi.box);
}

std::vector<Keypoint> ModelOracle::keypoints(int, const Frame& original, const Roi& roi) const {
  return model_.pose(original, roi.box);
}

}  // namespace patvcm
