#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "patvcm/aux_visual.hpp"
#include "patvcm/container.hpp"
#include "patvcm/errors.hpp"
#include "patvcm/roi.hpp"
#include "patvcm/scene.hpp"
#include "patvcm/taskmodels.hpp"

using namespace patvcm;

namespace {

Box box(int x0, int y0, int w, int h, double conf = 0.4) { return Box{x0, y0, w, h, conf}; }

bool same_geometry(const Box& a, const Box& b) { return a.x0 == b.x0 && a.y0 == b.y0 && a.w == b.w && a.h == b.h; }

RoiSet single_roi(const Box& b, int frames = 1, int frame = 0) {
  RoiSet r;
  r.frames.resize(static_cast<std::size_t>(frames));
  r.frames[static_cast<std::size_t>(frame)].push_back(Roi{b, b});
  return r;
}

VideoClip solid_clip(int frames, int h, int w, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  VideoClip clip;
  for (int f = 0; f < frames; ++f) clip.frames.push_back(Frame::filled(h, w, r, g, b));
  return clip;
}

double roi_l1(const VideoClip& a, const VideoClip& b, const RoiSet& rois) {
  double sum = 0;
  long n = 0;
  for (int f = 0; f < a.num_frames(); ++f) {
    const Mask m = roi_mask(rois, f, a.height(), a.width());
    for (int c = 0; c < 3; ++c) {
      const auto d = (a.frames[f].rgb[c].cast<double>() - b.frames[f].rgb[c].cast<double>()).abs();
      sum += m.select(d, 0.0).sum();
    }
    n += 3 * m.count();
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

}  // namespace

TEST(Roi, Stage1HalfOpenBounds) {
  const ClipDetections dets{{box(10, 10, 20, 20, 0.5), box(40, 40, 20, 20, 0.05), box(80, 80, 20, 20, 0.0499)}};
  const auto r = select_stage1(dets, 256, 256);
  ASSERT_EQ(r.frames[0].size(), 1u);
  EXPECT_EQ(r.frames[0][0].detection.confidence, 0.05);
  EXPECT_EQ(r.stage, 1);
}

TEST(Roi, Stage2ClosedLowerBound) {
  const ClipDetections dets{{box(10, 10, 20, 20, 0.3), box(40, 40, 20, 20, 0.2999), box(80, 80, 20, 20, 0.97)}};
  const auto r = select_stage2(dets, 256, 256);
  ASSERT_EQ(r.frames[0].size(), 2u);
  EXPECT_EQ(r.frames[0][0].detection.confidence, 0.97);
  EXPECT_EQ(r.frames[0][1].detection.confidence, 0.3);
}

TEST(Roi, TopThreeAfterSorting) {
  FrameDetections f;
  for (double c : {0.1, 0.45, 0.2, 0.4, 0.3}) f.push_back(box(static_cast<int>(c * 100), 0, 10, 10, c));
  const auto r = select_stage1({f}, 256, 256);
  ASSERT_EQ(r.frames[0].size(), 3u);
  EXPECT_EQ(r.frames[0][0].detection.confidence, 0.45);
  EXPECT_EQ(r.frames[0][1].detection.confidence, 0.4);
  EXPECT_EQ(r.frames[0][2].detection.confidence, 0.3);
}

TEST(Roi, TieBreakOnGeometry) {
  const FrameDetections f{box(50, 20, 10, 10, 0.4), box(10, 20, 10, 10, 0.4), box(30, 5, 10, 10, 0.4),
                          box(10, 20, 8, 10, 0.4)};
  const auto r = select_stage1({f}, 256, 256);
  ASSERT_EQ(r.frames[0].size(), 3u);
  EXPECT_TRUE(same_geometry(r.frames[0][0].detection, box(30, 5, 10, 10)));
  EXPECT_TRUE(same_geometry(r.frames[0][1].detection, box(10, 20, 8, 10)));
  EXPECT_TRUE(same_geometry(r.frames[0][2].detection, box(10, 20, 10, 10)));
}

TEST(Roi, Expansion) {
  EXPECT_TRUE(same_geometry(expand_box(box(100, 100, 100, 100), {2, 1}, 512, 512), box(50, 50, 200, 200)));
  EXPECT_TRUE(same_geometry(expand_box(box(0, 0, 100, 100), {2, 1}, 512, 512), box(0, 0, 150, 150)));
  EXPECT_TRUE(same_geometry(expand_box(box(13, 7, 21, 9), {1, 1}, 512, 512), box(13, 7, 21, 9)));
  // 1.3 x 10 = 13 about center 15: [8.5, 21.5) rounds outward to [8, 22).
  EXPECT_TRUE(same_geometry(expand_box(box(10, 10, 10, 10), {13, 10}, 512, 512), box(8, 8, 14, 14)));
}

TEST(Roi, ExpansionNeverShrinksAndKeepsCenter) {
  std::mt19937 rng(5);
  for (int n = 0; n < 2000; ++n) {
    const Box b = box(static_cast<int>(rng() % 400), static_cast<int>(rng() % 400), 1 + static_cast<int>(rng() % 100),
                      1 + static_cast<int>(rng() % 100));
    const Box e = expand_box(b, {13, 10}, 512, 512);
    EXPECT_LE(e.x0, b.x0);
    EXPECT_LE(e.y0, b.y0);
    EXPECT_GE(e.x1(), std::min(512, b.x1()));
    EXPECT_GE(e.y1(), std::min(512, b.y1()));
    if (e.x0 > 0 && e.x1() < 512) {
      EXPECT_LE(std::abs((e.x0 + e.x1()) - (b.x0 + b.x1())), 1);
    }
  }
}

TEST(Roi, EmptyDetections) {
  const auto r = select_stage2(ClipDetections(3), 256, 256);
  EXPECT_TRUE(r.empty());
  EXPECT_TRUE(roi_cells(r, {1, 32, 32}, default_profile()).empty());
}

TEST(Roi, Cells) {
  const auto& p = default_profile();
  const LatentDims dims{3, 64, 64};
  EXPECT_EQ(roi_cells(single_roi(box(0, 0, 8, 8)), dims, p), (std::vector<LatentCell>{{0, 0, 0}}));
  EXPECT_EQ(roi_cells(single_roi(box(4, 4, 8, 8)), dims, p),
            (std::vector<LatentCell>{{0, 0, 0}, {0, 0, 1}, {0, 1, 0}, {0, 1, 1}}));
}

TEST(Roi, CellsMergeAcrossGroupFrames) {
  RoiSet r;
  r.frames.resize(9);
  r.frames[1].push_back(Roi{box(0, 0, 8, 8), {}});
  r.frames[3].push_back(Roi{box(0, 0, 16, 8), {}});
  r.frames[8].push_back(Roi{box(8, 8, 8, 8), {}});
  EXPECT_EQ(roi_cells(r, {3, 8, 8}, default_profile()),
            (std::vector<LatentCell>{{1, 0, 0}, {1, 0, 1}, {2, 1, 1}}));
}

TEST(AuxVisual, RateIsTwelveBitsPerCell) {
  const auto orig = solid_clip(1, 32, 64, 100, 120, 140);
  const auto recon = solid_clip(1, 32, 64, 90, 120, 150);
  const auto rois = single_roi(box(0, 0, 40, 16));
  const auto s = encode_aux(orig, recon, rois, kDetAux, default_profile());
  EXPECT_EQ(s.codes.size(), 10u);
  EXPECT_EQ(aux_bits(s), 120u);
  EXPECT_EQ(pack_aux(s).bits, 120u);
  EXPECT_EQ(unpack_aux(pack_aux(s), s.stage, s.task_id), s);
  RoiSet none;
  none.frames.resize(1);
  EXPECT_EQ(aux_bits(encode_aux(orig, recon, none, kDetAux, default_profile())), 0u);
}

TEST(AuxVisual, IdenticalInputsStayWithinFloor) {
  const auto clip = generate_scene(4, SceneParams{}).clip;
  RoiSet rois;
  rois.frames.resize(static_cast<std::size_t>(clip.num_frames()));
  rois.frames[2].push_back(Roi{box(40, 40, 100, 90), {}});
  for (const auto* branch : {&kDetAux, &kSegAux}) {
    const auto s = encode_aux(clip, clip, rois, *branch, default_profile());
    const auto out = decode_aux(s, clip, rois, default_profile());
    for (int f = 0; f < clip.num_frames(); ++f) {
      for (int c = 0; c < 3; ++c) {
        const auto d = (out.frames[f].rgb[c].cast<int>() - clip.frames[f].rgb[c].cast<int>()).abs();
        ASSERT_LE(d.maxCoeff(), 31) << "frame " << f;
      }
    }
  }
}

TEST(AuxVisual, SaturatedResidualHitsTopCode) {
  const auto orig = solid_clip(1, 16, 16, 255, 128, 128);
  const auto recon = solid_clip(1, 16, 16, 0, 128, 128);
  const auto s = encode_aux(orig, recon, single_roi(box(0, 0, 8, 8)), kDetAux, default_profile());
  ASSERT_EQ(s.codes.size(), 1u);
  EXPECT_EQ(code_of(s.codes[0], aux_fsq_spec())[0], 7);
}

TEST(AuxVisual, EmptyStreamIsIdentity) {
  const auto clip = generate_scene(2, SceneParams{}).clip;
  RoiSet none;
  none.frames.resize(static_cast<std::size_t>(clip.num_frames()));
  EXPECT_EQ(decode_aux(AuxVisualStream{}, clip, none, default_profile()), clip);
}

TEST(AuxVisual, CountMismatchIsStructural) {
  const auto clip = solid_clip(1, 16, 16, 1, 2, 3);
  AuxVisualStream s;
  s.codes = {1, 2};
  EXPECT_THROW(decode_aux(s, clip, single_roi(box(0, 0, 8, 8)), default_profile()), StructuralError);
}

TEST(AuxVisual, LocalityAndErrorReduction) {
  const auto& p = default_profile();
  const ToyTaskModel model;
  double before = 0, after = 0;
  for (std::uint64_t seed = 20; seed < 30; ++seed) {
    const auto clip = generate_scene(seed, SceneParams{}).clip;
    const auto recon = decode_clip(encode_clip(clip, p), clip.num_frames(), p);
    const auto rois = select_stage2(detect_clip(model, recon), clip.width(), clip.height());
    const auto s = encode_aux(clip, recon, rois, kSegAux, p);
    const auto out = decode_aux(s, recon, rois, p);
    for (int f = 0; f < clip.num_frames(); ++f) {
      const Mask outside = !roi_mask(rois, f, clip.height(), clip.width());
      for (int c = 0; c < 3; ++c) {
        ASSERT_FALSE((outside && (out.frames[f].rgb[c] != recon.frames[f].rgb[c])).any());
      }
    }
    before += roi_l1(clip, recon, rois);
    after += roi_l1(clip, out, rois);
  }
  EXPECT_LT(after, before);
}

TEST(AuxVisual, ChainOfDetOnlyEqualsDirectDecode) {
  const auto& p = default_profile();
  const ToyTaskModel model;
  const auto clip = generate_scene(31, SceneParams{}).clip;
  const auto recon = decode_clip(encode_clip(clip, p), clip.num_frames(), p);
  const auto stage1 = select_stage1(detect_clip(model, recon), clip.width(), clip.height());
  const auto s = encode_aux(clip, recon, stage1, kDetAux, p);
  const AuxVisualStream streams[] = {s};
  const auto a = chain(streams, recon, model, p);
  EXPECT_EQ(a.stage1, stage1);
  EXPECT_EQ(a.det_refined, decode_aux(s, recon, stage1, p));
  const auto b = chain(streams, recon, model, p);
  EXPECT_EQ(a.det_refined, b.det_refined);
}

TEST(AuxVisual, DetAuxRowArithmetic) {
  EXPECT_NEAR(bits_per_pixel(196608 + 40960, 9, 512, 512).value(), 0.100695, 5e-6);
}
