#include <cmath>
#include <filesystem>
#include <numbers>
#include <stdexcept>

#include <boost/math/distributions/students_t.hpp>
#include <gtest/gtest.h>

#include "patvcm/baseline_codec.hpp"
#include "patvcm/clip_io.hpp"
#include "patvcm/metrics.hpp"
#include "patvcm/roi.hpp"
#include "patvcm/scene.hpp"
#include "patvcm/taskmodels.hpp"

using namespace patvcm;

namespace {

Frame paint(Frame f, const Box& b, Rgb c) {
  for (int k = 0; k < 3; ++k) f.rgb[k].block(b.y0, b.x0, b.h, b.w).setConstant(c[static_cast<std::size_t>(k)]);
  return f;
}

Mask box_mask(int h, int w, const Box& b) {
  Mask m = Mask::Constant(h, w, false);
  m.block(b.y0, b.x0, b.h, b.w).setConstant(true);
  return m;
}

// Blend every pixel halfway toward a flat gray: same shapes, less contrast.
Frame halve_contrast(const Frame& f, std::uint8_t gray) {
  Frame out = f;
  for (int c = 0; c < 3; ++c) {
    out.rgb[c] = ((f.rgb[c].cast<int>() + gray + 1) / 2).cast<std::uint8_t>();
  }
  return out;
}

std::vector<Box> visible_boxes(const GroundTruth& gt, int frame) {
  std::vector<Box> out;
  for (const auto& o : gt.objects) {
    if (!o.distractor) out.push_back(o.boxes[static_cast<std::size_t>(frame)]);
  }
  return out;
}

}  // namespace

TEST(Scene, DeterministicPerSeed) {
  const auto a = generate_scene(42, SceneParams{});
  const auto b = generate_scene(42, SceneParams{});
  EXPECT_EQ(a.clip, b.clip);
  ASSERT_EQ(a.truth.objects.size(), b.truth.objects.size());
  for (std::size_t i = 0; i < a.truth.objects.size(); ++i) {
    EXPECT_EQ(a.truth.objects[i].boxes, b.truth.objects[i].boxes);
    EXPECT_EQ(a.truth.objects[i].caption, b.truth.objects[i].caption);
  }
  EXPECT_FALSE(a.clip == generate_scene(43, SceneParams{}).clip);
}

TEST(Scene, NoObjectsGivesBackgroundOnly) {
  SceneParams p;
  p.min_objects = p.max_objects = 0;
  const auto s = generate_scene(1, p);
  EXPECT_TRUE(s.truth.objects.empty());
  EXPECT_EQ(s.clip.num_frames(), p.frames);
  for (const auto& f : s.clip.frames) {
    for (int c = 0; c < 3; ++c) {
      // Vertical gradient only: every row is constant.
      for (int y = 0; y < f.height(); ++y) EXPECT_EQ(f.rgb[c].row(y).minCoeff(), f.rgb[c].row(y).maxCoeff());
    }
  }
  EXPECT_TRUE(ToyTaskModel().detect(s.clip.frames[0]).empty());
}

TEST(Scene, InfeasibleParamsRejected) {
  SceneParams p;
  p.max_size = 250;
  EXPECT_THROW(make_scene(1, p), std::domain_error);
  p = SceneParams{};
  p.min_objects = 3;
  p.max_objects = 2;
  EXPECT_THROW(make_scene(1, p), std::domain_error);
}

TEST(Scene, MaskAreaMatchesAnalyticArea) {
  SceneParams p;
  p.min_objects = p.max_objects = 1;
  p.figure_probability = 0.0;
  p.distractor_probability = 0.0;
  int ellipses = 0, rects = 0;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const auto s = generate_scene(seed, p);
    ASSERT_EQ(s.truth.objects.size(), 1u);
    const auto& o = s.truth.objects[0];
    const Box& b = o.boxes[0];
    const double area = static_cast<double>(o.masks[0].count());
    if (o.kind == ShapeKind::Rect) {
      ++rects;
      EXPECT_EQ(area, static_cast<double>(b.area()));
    } else {
      ++ellipses;
      const double a = b.w / 2.0, c = b.h / 2.0;
      const double analytic = std::numbers::pi * a * c;
      // One-pixel band along the boundary: perimeter bound 2 pi max(a, c).
      EXPECT_LE(std::abs(area - analytic), 2.0 * std::numbers::pi * std::max(a, c)) << "seed " << seed;
    }
  }
  EXPECT_GT(ellipses, 0);
  EXPECT_GT(rects, 0);
}

TEST(Scene, DistractorsSitInsideTheirHost) {
  SceneParams p;
  p.distractor_probability = 1.0;
  p.figure_probability = 0.0;
  p.min_size = 60;
  int seen = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto s = make_scene(seed, p);
    for (const auto& sh : s.shapes) {
      if (sh.host < 0) continue;
      ++seen;
      const Shape& host = s.shapes[static_cast<std::size_t>(sh.host)];
      EXPECT_NE(sh.class_id, host.class_id);
      EXPECT_GE(sh.x0, host.x0);
      EXPECT_LE(sh.x0 + sh.w, host.x0 + host.w);
    }
  }
  EXPECT_GT(seen, 0);
}

TEST(ToyDetect, CleanFramesMatchEveryBox) {
  const ToyTaskModel model;
  int boxes = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto s = generate_scene(seed, SceneParams{});
    for (int f = 0; f < s.clip.num_frames(); f += 4) {
      const auto gt = visible_boxes(s.truth, f);
      const auto m = match_detections(gt, model.detect(s.clip.frames[static_cast<std::size_t>(f)]));
      ASSERT_EQ(m.pairs.size(), gt.size()) << "seed " << seed << " frame " << f;
      for (const auto& pr : m.pairs) EXPECT_GE(pr.iou, 0.9) << "seed " << seed << " frame " << f;
      boxes += static_cast<int>(gt.size());
    }
  }
  EXPECT_GT(boxes, 50);
}

TEST(ToyDetect, EmptyFrameHasNoDetections) {
  EXPECT_TRUE(ToyTaskModel().detect(Frame::filled(64, 64, 90, 100, 110)).empty());
}

TEST(ToyDetect, ReducedContrastLowersConfidence) {
  const ToyTaskModel model;
  int compared = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto s = generate_scene(seed, SceneParams{});
    const Frame& clean = s.clip.frames[0];
    const auto a = model.detect(clean);
    const auto b = model.detect(halve_contrast(clean, 128));
    for (const auto& da : a) {
      for (const auto& db : b) {
        if (box_iou(da, db) < 0.9) continue;
        EXPECT_LT(db.confidence, da.confidence) << "seed " << seed;
        ++compared;
      }
    }
  }
  EXPECT_GT(compared, 10);
}

TEST(ToyDetect, DeterministicOrdering) {
  const ToyTaskModel model;
  const auto s = generate_scene(8, SceneParams{});
  EXPECT_EQ(model.detect(s.clip.frames[3]), model.detect(s.clip.frames[3]));
}

TEST(ToySegment, CleanDiskFromCenter) {
  SceneParams p;
  p.min_objects = p.max_objects = 1;
  p.figure_probability = 0.0;
  p.distractor_probability = 0.0;
  const ToyTaskModel model;
  int disks = 0;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const auto s = generate_scene(seed, p);
    const auto& o = s.truth.objects[0];
    if (o.kind != ShapeKind::Ellipse) continue;
    ++disks;
    const Mask m = model.segment(s.clip.frames[0], o.boxes[0], {});
    EXPECT_GE(mask_iou(m, o.masks[0]), 0.95) << "seed " << seed;
  }
  EXPECT_GT(disks, 5);
}

TEST(ToySegment, BackgroundSeedMissesTheShape) {
  const Frame f = paint(Frame::filled(64, 64, 150, 150, 150), {20, 20, 24, 24}, {40, 60, 200});
  const Box roi{10, 10, 44, 44};
  const Mask truth = box_mask(64, 64, {20, 20, 24, 24});
  const ToyTaskModel model;
  EXPECT_DOUBLE_EQ(mask_iou(model.segment(f, roi, {}), truth), 1.0);
  const PromptPoint bg[] = {{{12, 12}, true}};
  EXPECT_LT(mask_iou(model.segment(f, roi, bg), truth), 0.1);
}

TEST(ToySegment, NegativePointRemovesDistractor) {
  // Object A (left) and B (right) within tolerance of each other; the
  // background is within tolerance of B only.
  Frame f = Frame::filled(64, 64, 140, 140, 140);
  f = paint(f, {16, 16, 16, 32}, {100, 100, 100});
  f = paint(f, {32, 16, 16, 32}, {120, 120, 120});
  const Box roi{8, 8, 48, 48};
  const Mask a = box_mask(64, 64, {16, 16, 16, 32});
  const ToyTaskModel model;
  const PromptPoint fg[] = {{{20, 30}, true}};
  const double fg_only = mask_iou(model.segment(f, roi, fg), a);
  EXPECT_NEAR(fg_only, 0.5, 1e-12);
  const PromptPoint fgbg[] = {{{20, 30}, true}, {{10, 10}, false}};
  EXPECT_DOUBLE_EQ(mask_iou(model.segment(f, roi, fgbg), a), 1.0);
}

TEST(ToySegment, SeedOutsideBoxIsDomainError) {
  const Frame f = Frame::filled(32, 32, 1, 2, 3);
  const PromptPoint out[] = {{{30, 30}, true}};
  EXPECT_THROW(ToyTaskModel().segment(f, {0, 0, 10, 10}, out), std::domain_error);
}

TEST(ToyDepth, AlignedAbsRelOnCleanFrames) {
  const ToyTaskModel model;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto s = generate_scene(seed, SceneParams{});
    for (int f = 0; f < s.clip.num_frames(); f += 4) {
      const Grid<double> pred = model.depth(s.clip.frames[static_cast<std::size_t>(f)]).cast<double>();
      const Grid<double> gt = s.truth.depth[static_cast<std::size_t>(f)].cast<double>();
      const auto st = align_scale_shift(Grid<double>(pred), Grid<double>(gt));
      EXPECT_LE(*absrel(Grid<double>(st.s * pred + st.t), Grid<double>(gt)), 0.02) << "seed " << seed;
    }
  }
}

TEST(ToyClassify, PaletteIdentity) {
  const auto& pal = class_palette();
  ASSERT_EQ(pal.size(), 80u);
  const ToyTaskModel model;
  const Box roi{8, 8, 16, 16};
  for (int k = 0; k < 80; ++k) {
    const Rgb c = pal[static_cast<std::size_t>(k)];
    const Frame f = paint(Frame::filled(32, 32, 0, 0, 0), roi, c);
    EXPECT_EQ(model.classify(f, roi), k);
    EXPECT_EQ(nearest_palette_class(Eigen::Vector3d(c[0], c[1], c[2])), k);
    EXPECT_EQ(class_of_caption(class_caption(k)), k);
  }
}

TEST(ToyClassify, PaletteIsWellSeparated) {
  const auto& pal = class_palette();
  double min_d = 1e9;
  for (std::size_t i = 0; i < pal.size(); ++i) {
    for (std::size_t j = i + 1; j < pal.size(); ++j) {
      double d2 = 0;
      for (int c = 0; c < 3; ++c) d2 += std::pow(static_cast<double>(pal[i][c]) - pal[j][c], 2);
      min_d = std::min(min_d, std::sqrt(d2));
    }
  }
  EXPECT_GE(min_d, 30.0);
}

TEST(ToyPose, ExactBoxGivesSubPixelError) {
  SceneParams p;
  p.figure_probability = 1.0;
  const ToyTaskModel model;
  int figures = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto s = generate_scene(seed, p);
    for (const auto& o : s.truth.objects) {
      if (o.kind != ShapeKind::Figure) continue;
      ++figures;
      const auto kp = model.pose(s.clip.frames[0], o.boxes[0]);
      EXPECT_LE(mke(kp, o.keypoints[0]), 1.0) << "seed " << seed;
    }
  }
  EXPECT_GT(figures, 5);
}

namespace {

// Per-clip corpus metrics, oriented so larger is better. Objects without a
// matching stage-2 ROI score zero, so a model cannot gain by dropping hard
// instances.
struct ToyScores {
  double det = 0, seg = 0, neg_depth = 0, cls = 0, pck = 0;
};

ToyScores score_clip(const ToyTaskModel& model, const SceneSample& s, const ReconClip& recon) {
  const auto rois = select_stage2(detect_clip(model, recon), recon.width(), recon.height());
  ToyScores out;
  int objects = 0, keypoints = 0, frames = 0;
  for (int f = 0; f < recon.num_frames(); f += 2) {
    const auto fi = static_cast<std::size_t>(f);
    const Frame& fr = recon.frames[fi];
    ++frames;
    out.det += match_detections(visible_boxes(s.truth, f), model.detect(fr)).matched_iou();
    const Grid<double> pred = model.depth(fr).cast<double>();
    const Grid<double> gt = s.truth.depth[fi].cast<double>();
    const auto st = align_scale_shift(pred, gt);
    out.neg_depth -= *absrel(Grid<double>(st.s * pred + st.t), gt);
    for (std::size_t i = 0; i < s.truth.objects.size(); ++i) {
      const auto& o = s.truth.objects[i];
      if (o.distractor) continue;
      ++objects;
      const bool figure = o.kind == ShapeKind::Figure;
      if (figure) keypoints += 17;
      const Roi* hit = nullptr;
      for (const Roi& r : rois.frames[fi]) {
        if (match_object(s.truth, f, r.detection) == static_cast<int>(i)) {
          hit = &r;
          break;
        }
      }
      if (hit == nullptr) continue;
      out.seg += mask_iou(model.segment(fr, hit->box, {}), crop_to_box(o.masks[fi], hit->box));
      out.cls += model.classify(fr, hit->box) == o.class_id ? 1.0 : 0.0;
      if (!figure) continue;
      // PCK@0.1 of the longer GT box side.
      const Box& b = o.boxes[fi];
      const double tol = 0.1 * std::max(b.w, b.h);
      const auto kp = model.pose(fr, hit->box);
      for (std::size_t j = 0; j < kp.size(); ++j) {
        const auto& g = o.keypoints[fi][j];
        if (std::hypot(kp[j].x - g.x, kp[j].y - g.y) <= tol) out.pck += 1.0;
      }
    }
  }
  out.det /= frames;
  out.neg_depth /= frames;
  if (objects > 0) {
    out.seg /= objects;
    out.cls /= objects;
  }
  out.pck = keypoints > 0 ? out.pck / keypoints : 0.0;
  return out;
}

// One-sided paired t-test: is `coarse` better than `fine` on average?
double improvement_p_value(const std::vector<double>& fine, const std::vector<double>& coarse) {
  const std::size_t n = fine.size();
  Eigen::ArrayXd d(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) d[static_cast<Eigen::Index>(i)] = coarse[i] - fine[i];
  const double mean = d.mean();
  const double var = (d - mean).square().sum() / static_cast<double>(n - 1);
  if (var == 0.0) return mean > 0.0 ? 0.0 : 1.0;
  const double t = mean / std::sqrt(var / static_cast<double>(n));
  return boost::math::cdf(boost::math::complement(boost::math::students_t(static_cast<double>(n - 1)), t));
}

}  // namespace

TEST(ToyModels, CoarserProfilesNeverHelp) {
  const ToyTaskModel model;
  const auto& ladder = builtin_profiles();
  const std::size_t n = ladder.size();
  std::vector<std::vector<ToyScores>> scores(n);
  for (std::uint64_t seed = 300; seed < 330; ++seed) {
    const auto s = generate_scene(seed, SceneParams{});
    for (std::size_t k = 0; k < n; ++k) {
      const auto recon = decode_clip(encode_clip(s.clip, ladder[k]), s.clip.num_frames(), ladder[k]);
      scores[k].push_back(score_clip(model, s, recon));
    }
  }
  const std::pair<const char*, double ToyScores::*> metrics[] = {
      {"detect", &ToyScores::det}, {"segment", &ToyScores::seg}, {"depth", &ToyScores::neg_depth},
      {"classify", &ToyScores::cls}, {"pose", &ToyScores::pck}};
  for (const auto& [name, field] : metrics) {
    std::vector<std::vector<double>> v(n);
    for (std::size_t k = 0; k < n; ++k) {
      for (const auto& sc : scores[k]) v[k].push_back(sc.*field);
    }
    for (std::size_t k = 1; k < n; ++k) {
      EXPECT_GT(improvement_p_value(v[k - 1], v[k]), 0.05) << name << ", profile " << k;
    }
    double first = 0, last = 0;
    for (std::size_t i = 0; i < v[0].size(); ++i) {
      first += v[0][i];
      last += v[n - 1][i];
    }
    EXPECT_GT(first, last) << name;
  }
}

TEST(ClipIo, RoundtripWithTruth) {
  const auto dir = std::filesystem::temp_directory_path() / "patvcm_clip_io_test";
  std::filesystem::remove_all(dir);
  const auto s = generate_scene(5, SceneParams{});
  write_clip(dir, s.clip);
  write_truth(dir, s.truth);
  const auto back = read_clip(dir / "manifest.txt");
  EXPECT_EQ(back, s.clip);
  EXPECT_EQ(back.seed, s.clip.seed);
  const auto gt = read_truth(dir, s.clip.num_frames(), s.clip.height(), s.clip.width());
  ASSERT_TRUE(gt.has_value());
  ASSERT_EQ(gt->objects.size(), s.truth.objects.size());
  for (std::size_t i = 0; i < gt->objects.size(); ++i) {
    const auto& a = gt->objects[i];
    const auto& b = s.truth.objects[i];
    EXPECT_EQ(a.class_id, b.class_id);
    EXPECT_EQ(a.caption, b.caption);
    EXPECT_EQ(a.distractor, b.distractor);
    EXPECT_EQ(a.boxes.size(), b.boxes.size());
    for (std::size_t f = 0; f < a.masks.size(); ++f) EXPECT_TRUE((a.masks[f] == b.masks[f]).all());
    EXPECT_EQ(a.keypoints.size(), b.keypoints.size());
  }
  for (std::size_t f = 0; f < gt->depth.size(); ++f) EXPECT_TRUE((gt->depth[f] == s.truth.depth[f]).all());
  std::filesystem::remove_all(dir);
}
