#include <array>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "patvcm/errors.hpp"
#include "patvcm/evaluate.hpp"
#include "patvcm/pipeline.hpp"
#include "patvcm/scene.hpp"
#include "patvcm/taskmodels.hpp"

using namespace patvcm;

namespace {

// Forwards to the toy model and counts calls per capability.
class CountingModel final : public TaskModel {
 public:
  mutable std::array<int, 7> calls{};
  enum { kDetect, kSegment, kCaptionSegment, kDepth, kClassify, kPose, kCaption };

  unsigned capabilities() const override { return inner_.capabilities(); }
  FrameDetections detect(const Frame& f) const override {
    ++calls[kDetect];
    return inner_.detect(f);
  }
  Mask segment(const Frame& f, const Box& b, std::span<const PromptPoint> p) const override {
    ++calls[kSegment];
    return inner_.segment(f, b, p);
  }
  Mask segment_with_caption(const Frame& f, const Box& b, const std::string& c) const override {
    ++calls[kCaptionSegment];
    return inner_.segment_with_caption(f, b, c);
  }
  DepthMap depth(const Frame& f) const override {
    ++calls[kDepth];
    return inner_.depth(f);
  }
  int classify(const Frame& f, const Box& b) const override {
    ++calls[kClassify];
    return inner_.classify(f, b);
  }
  std::vector<Keypoint> pose(const Frame& f, const Box& b) const override {
    ++calls[kPose];
    return inner_.pose(f, b);
  }
  std::string caption(const Frame& f, const Box& b) const override {
    ++calls[kCaption];
    return inner_.caption(f, b);
  }

 private:
  ToyTaskModel inner_;
};

// Detection only: no segmentation capability.
class DetectOnlyModel final : public TaskModel {
 public:
  unsigned capabilities() const override { return kCapDetect; }
  FrameDetections detect(const Frame& f) const override { return inner_.detect(f); }
  Mask segment(const Frame&, const Box&, std::span<const PromptPoint>) const override { return {}; }
  Mask segment_with_caption(const Frame&, const Box&, const std::string&) const override { return {}; }
  DepthMap depth(const Frame&) const override { return {}; }
  int classify(const Frame&, const Box&) const override { return 0; }
  std::vector<Keypoint> pose(const Frame&, const Box&) const override { return {}; }
  std::string caption(const Frame&, const Box&) const override { return {}; }

 private:
  ToyTaskModel inner_;
};

PipelineConfig config(const std::string& text) {
  std::istringstream in(text);
  const auto v = parse_configs(in);
  EXPECT_EQ(v.size(), 1u);
  return v.front();
}

const AuxStreamRecord* find_record(const Bitstream& s, AuxType type) {
  for (const auto& r : s.records) {
    if (r.type_tag == static_cast<std::uint8_t>(type)) return &r;
  }
  return nullptr;
}

std::string config_error(const std::string& text) {
  std::istringstream in(text);
  try {
    parse_configs(in);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "no error";
}

}  // namespace

TEST(Config, ParsesBlocksAndComments) {
  std::istringstream in(
      "# two systems\n"
      "system = base\n"
      "\n"
      "system = full   # everything\n"
      "profile = 1\n"
      "det = on\n"
      "seg = on\n"
      "depth = off\n"
      "prompt = fgbg\n"
      "text = adaptive\n"
      "class = on\n"
      "skeleton = on\n");
  const auto v = parse_configs(in);
  ASSERT_EQ(v.size(), 2u);
  EXPECT_EQ(v[0].label, "base");
  EXPECT_FALSE(v[0].det);
  EXPECT_FALSE(v[0].stage2());
  EXPECT_EQ(v[1].label, "full");
  EXPECT_EQ(v[1].profile, 1);
  EXPECT_TRUE(v[1].det && v[1].seg && !v[1].depth && v[1].class_token && v[1].skeleton);
  EXPECT_EQ(v[1].prompt, PromptMode::Pair);
  EXPECT_EQ(v[1].text, TextMode::Adaptive);
  EXPECT_EQ(config("system = a\nprompt = 1pt\ntext = uniform\n").prompt, PromptMode::Single);
}

TEST(Config, ErrorsNameTheLine) {
  EXPECT_NE(config_error("system = a\ndet = maybe\n").find("line 2"), std::string::npos);
  EXPECT_NE(config_error("det = on\n").find("line 1"), std::string::npos);
  EXPECT_NE(config_error("system = a\n\nbogus = 1\n").find("line 3"), std::string::npos);
  EXPECT_NE(config_error("system = a\nprompt = 3pt\n").find("line 2"), std::string::npos);
  EXPECT_NE(config_error("system = a\nprofile = x\n").find("line 2"), std::string::npos);
  EXPECT_NE(config_error("system = a\nno equals sign\n").find("line 2"), std::string::npos);
  EXPECT_EQ(config_error("# only a comment\n"), "no system blocks");
}

TEST(Config, Validation) {
  const unsigned all = ToyTaskModel().capabilities();
  EXPECT_NO_THROW(validate_config(config("system = a\ndet = on\nseg = on\n"), all));
  EXPECT_THROW(validate_config(config("system = a\nseg = on\n"), all), ConfigError);
  EXPECT_THROW(validate_config(config("system = a\nclass = on\n"), all), ConfigError);
  EXPECT_THROW(validate_config(config("system = a\nprofile = 9\n"), all), ConfigError);
  EXPECT_THROW(validate_config(config("system = a\ndet = on\nprompt = 1pt\n"), kCapDetect), ConfigError);
  EXPECT_NO_THROW(validate_config(config("system = a\ndet = on\n"), kCapDetect));
}

TEST(Pipeline, EncodeRejectsInvalidConfig) {
  const auto s = generate_scene(1, SceneParams{});
  const GroundTruthOracle oracle(s.truth);
  EXPECT_THROW(pipeline_encode(s.clip, config("system = a\ndet = on\ntext = uniform\n"), DetectOnlyModel(), oracle),
               ConfigError);
}

TEST(Pipeline, NoAuxIsBaselineOnly) {
  SceneParams p;
  p.height = p.width = 512;
  const auto s = generate_scene(3, p);
  const ToyTaskModel model;
  const GroundTruthOracle oracle(s.truth);
  const auto r = pipeline_encode(s.clip, config("system = base\n"), model, oracle);
  EXPECT_TRUE(r.stream.records.empty());
  EXPECT_EQ(r.stream.baseline.bits, 196608u);
  EXPECT_EQ(r.stream.total_bits(), 196608u);
  EXPECT_EQ(bits_per_pixel(r.stream.total_bits(), 9, 512, 512).to_string(), "0.083333");
  const auto d = pipeline_decode(mux(r.stream), model);
  EXPECT_EQ(d.recon0, r.recon0);
  EXPECT_FALSE(d.has_det);
  EXPECT_TRUE(d.warnings.empty());
}

TEST(Pipeline, ByteIdenticalAcrossRuns) {
  const auto s = generate_scene(12, SceneParams{});
  const ToyTaskModel model;
  const GroundTruthOracle oracle(s.truth);
  const auto cfg = config(
      "system = full\ndet = on\nseg = on\ndepth = on\nprompt = fgbg\ntext = adaptive\nclass = on\nskeleton = on\n");
  EXPECT_EQ(mux(pipeline_encode(s.clip, cfg, model, oracle).stream),
            mux(pipeline_encode(s.clip, cfg, model, oracle).stream));
}

TEST(Pipeline, RecordOrderAndPerRoiCosts) {
  const ToyTaskModel model;
  int rois_seen = 0;
  for (std::uint64_t seed = 40; seed < 46; ++seed) {
    const auto s = generate_scene(seed, SceneParams{});
    const GroundTruthOracle oracle(s.truth);
    const auto pair = pipeline_encode(
        s.clip,
        config("system = a\ndet = on\nseg = on\ndepth = on\nprompt = fgbg\ntext = uniform\nclass = on\nskeleton = on\n"),
        model, oracle);
    const std::size_t n = pair.stage2.total();
    rois_seen += static_cast<int>(n);
    ASSERT_EQ(pair.stream.records.size(), 7u);
    const std::uint8_t expected_tags[] = {1, 1, 1, 2, 3, 4, 5};
    const std::uint8_t expected_tasks[] = {0, 1, 2, 1, 1, 3, 4};
    for (std::size_t i = 0; i < 7; ++i) {
      EXPECT_EQ(pair.stream.records[i].type_tag, expected_tags[i]) << i;
      EXPECT_EQ(pair.stream.records[i].task_id, expected_tasks[i]) << i;
    }
    EXPECT_EQ(find_record(pair.stream, AuxType::Prompt)->payload_bits(), 11 * n);
    EXPECT_EQ(find_record(pair.stream, AuxType::Text)->payload_bits(), 153 * n);
    EXPECT_EQ(find_record(pair.stream, AuxType::ClassLabel)->payload_bits(), 7 * n);

    const auto single = pipeline_encode(s.clip, config("system = b\ndet = on\nprompt = 1pt\n"), model, oracle);
    EXPECT_EQ(find_record(single.stream, AuxType::Prompt)->payload_bits(), 6 * n);
    EXPECT_EQ(find_record(single.stream, AuxType::Text), nullptr);
  }
  EXPECT_GT(rois_seen, 5);
}

TEST(Pipeline, DecoderReproducesEncoderRois) {
  const ToyTaskModel model;
  const auto cfg = config("system = a\ndet = on\nseg = on\ndepth = on\nprompt = fgbg\n");
  for (std::uint64_t seed = 60; seed < 70; ++seed) {
    const auto s = generate_scene(seed, SceneParams{});
    const GroundTruthOracle oracle(s.truth);
    const auto e = pipeline_encode(s.clip, cfg, model, oracle);
    const auto d = pipeline_decode(mux(e.stream), model);
    EXPECT_EQ(d.stage1, e.stage1) << "seed " << seed;
    EXPECT_EQ(d.stage2, e.stage2) << "seed " << seed;
    EXPECT_EQ(d.det_refined, e.det_refined) << "seed " << seed;
    ASSERT_TRUE(d.seg_refined.has_value());
    ASSERT_TRUE(d.depth_refined.has_value());
    for (const auto& p : d.prompts) EXPECT_TRUE(p.has_value());
  }
}

TEST(Pipeline, ClassDecodeNeedsNoRecognitionCalls) {
  const ToyTaskModel toy;
  int checked = 0;
  for (std::uint64_t seed = 80; seed < 86; ++seed) {
    const auto s = generate_scene(seed, SceneParams{});
    const GroundTruthOracle oracle(s.truth);
    const auto e = pipeline_encode(s.clip, config("system = a\ndet = on\nclass = on\n"), toy, oracle);
    const CountingModel counting;
    const auto d = pipeline_decode(mux(e.stream), counting);
    EXPECT_EQ(counting.calls[CountingModel::kClassify], 0);
    EXPECT_EQ(counting.calls[CountingModel::kCaption], 0);
    EXPECT_EQ(counting.calls[CountingModel::kSegment], 0);
    EXPECT_GT(counting.calls[CountingModel::kDetect], 0);
    const auto rois = flatten(e.stage2);
    ASSERT_EQ(d.classes.size(), rois.size());
    for (std::size_t i = 0; i < rois.size(); ++i) {
      ASSERT_TRUE(d.classes[i].has_value());
      EXPECT_EQ(*d.classes[i], oracle.class_label(rois[i].frame, s.clip.frames[rois[i].frame], rois[i].roi));
      ++checked;
    }
  }
  EXPECT_GT(checked, 5);
}

TEST(Pipeline, UnknownRecordSkippedWithWarning) {
  const ToyTaskModel model;
  const auto s = generate_scene(14, SceneParams{});
  const GroundTruthOracle oracle(s.truth);
  auto e = pipeline_encode(s.clip, config("system = a\ndet = on\nclass = on\n"), model, oracle);
  const auto clean = pipeline_decode(mux(e.stream), model);
  e.stream.records.insert(e.stream.records.begin() + 1, AuxStreamRecord{200, 9, BitPayload{{0xAA, 0x80}, 9}});
  ++e.stream.header.stream_count;
  const auto d = pipeline_decode(mux(e.stream), model);
  ASSERT_EQ(d.warnings.size(), 1u);
  EXPECT_NE(d.warnings[0].find("record 1"), std::string::npos) << d.warnings[0];
  EXPECT_EQ(d.classes, clean.classes);
  EXPECT_EQ(d.det_refined, clean.det_refined);
}

TEST(Pipeline, CellCountMismatchNamesStage) {
  const ToyTaskModel model;
  const auto s = generate_scene(15, SceneParams{});
  const GroundTruthOracle oracle(s.truth);
  auto e = pipeline_encode(s.clip, config("system = a\ndet = on\nseg = on\n"), model, oracle);
  ASSERT_GT(e.stage2.total(), 0u);
  auto& seg = e.stream.records[1];
  seg.payload.bits += 12;
  seg.payload.bytes.resize((seg.payload.bits + 7) / 8, 0);
  try {
    pipeline_decode(mux(e.stream), model);
    FAIL() << "expected StructuralError";
  } catch (const StructuralError& err) {
    EXPECT_NE(std::string(err.what()).find("stage-2"), std::string::npos) << err.what();
  }
}

TEST(Pipeline, StageTwoRecordWithoutDetectionIsStructural) {
  const ToyTaskModel model;
  const auto s = generate_scene(16, SceneParams{});
  const GroundTruthOracle oracle(s.truth);
  auto e = pipeline_encode(s.clip, config("system = a\ndet = on\nclass = on\n"), model, oracle);
  e.stream.records.erase(e.stream.records.begin());
  --e.stream.header.stream_count;
  EXPECT_THROW(pipeline_decode(mux(e.stream), model), StructuralError);
}

TEST(Pipeline, TruncatedFileIsStructural) {
  const ToyTaskModel model;
  const auto s = generate_scene(17, SceneParams{});
  const GroundTruthOracle oracle(s.truth);
  auto bytes = mux(pipeline_encode(s.clip, config("system = a\ndet = on\n"), model, oracle).stream);
  bytes.resize(bytes.size() / 2);
  EXPECT_THROW(pipeline_decode(bytes, model), StructuralError);
}

TEST(Evaluate, ReportRowsAreConsistent) {
  const ToyTaskModel model;
  std::istringstream in(
      "system = baseline\n"
      "system = det\ndet = on\n"
      "system = full\ndet = on\nseg = on\ndepth = on\nprompt = fgbg\nclass = on\nskeleton = on\n");
  Campaign c;
  c.systems = parse_configs(in);
  for (std::uint64_t seed = 90; seed < 93; ++seed) {
    auto s = generate_scene(seed, SceneParams{});
    c.per_clip.push_back(evaluate_clip({std::move(s.clip), std::move(s.truth)}, c.systems, model));
  }
  ASSERT_EQ(c.per_clip[0].size(), 3u);
  for (const auto& clip : c.per_clip) {
    // Evaluation instances are shared across systems.
    EXPECT_EQ(clip[0].seg_iou.size(), clip[1].seg_iou.size());
    EXPECT_EQ(clip[0].seg_iou.size(), clip[2].seg_iou.size());
    EXPECT_EQ(clip[0].seg_baseline_iou, clip[0].seg_iou);
    EXPECT_LT(clip[0].bits, clip[1].bits);
    EXPECT_LT(clip[1].bits, clip[2].bits);
  }
  EXPECT_NEAR(campaign_bpp(c, 0), 196608.0 / (9.0 * 512 * 512), 1e-12);
  const auto rows = report_rows(c);
  bool saw_iou = false, saw_bins = false;
  for (const auto& r : rows) {
    if (r.system == "full") {
      EXPECT_NEAR(r.bpp, campaign_bpp(c, 2), 1e-12);
    }
    if (r.task == "segmentation" && r.metric == "Mean IoU") saw_iou = true;
    if (r.metric.find("[difficulty ") != std::string::npos || r.metric.find("[size ") != std::string::npos) {
      saw_bins = true;
    }
  }
  EXPECT_TRUE(saw_iou);
  EXPECT_TRUE(saw_bins);
  std::ostringstream csv;
  write_csv(csv, rows);
  EXPECT_EQ(csv.str().substr(0, csv.str().find('\n')), "task,system,bpp,metric,value");
}

TEST(Evaluate, RateSweepIsMonotoneTagged) {
  const ToyTaskModel model;
  std::vector<ClipInput> corpus;
  for (std::uint64_t seed = 94; seed < 96; ++seed) {
    auto s = generate_scene(seed, SceneParams{});
    corpus.push_back({std::move(s.clip), std::move(s.truth)});
  }
  // Adjacent ladder steps can trade places on a single clip; the full ladder
  // is checked on a 20-clip corpus by the acceptance run.
  const auto rows = rate_sweep(corpus, {0, 2, 4}, model);
  ASSERT_FALSE(rows.empty());
  double last_bpp = 1e9;
  for (const auto& r : rows) {
    if (r.metric != "PSNR") continue;
    EXPECT_LT(r.bpp, last_bpp);
    last_bpp = r.bpp;
  }
  EXPECT_EQ(rows.back().value, 1.0) << rows.back().metric;
}
