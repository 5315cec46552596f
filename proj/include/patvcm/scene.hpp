#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "patvcm/image.hpp"
#include "patvcm/task_model.hpp"
#include "patvcm/taskmodels.hpp"

namespace patvcm {

enum class ShapeKind { Rect, Ellipse, Figure };
const char* shape_name(ShapeKind k);

struct Shape {
  ShapeKind kind = ShapeKind::Rect;
  int x0 = 0, y0 = 0, w = 0, h = 0;  // frame-0 box
  int vx = 0, vy = 0;                // pixels per frame
  int class_id = 0;
  Rgb color{};
  double shading = 0.0;  // luma-neutral chroma ramp amplitude across the box
  std::string caption;
  int host = -1;  // index of the shape this one sits on, -1 for top-level objects

  Box box_at(int frame) const { return Box{x0 + vx * frame, y0 + vy * frame, w, h, 1.0}; }
};

struct SceneParams {
  int frames = 9;
  int height = 256;
  int width = 256;
  int min_objects = 1;
  int max_objects = 3;
  int min_size = 24;
  int max_size = 88;
  int margin = 8;
  int gap = 12;
  double min_contrast = 90.0;   // max channel |object - background|
  double max_contrast = 120.0;
  double shading = 16.0;
  double figure_probability = 0.3;
  // Small shape of another class drawn at the center of a larger object.
  double distractor_probability = 0.3;
  // Captions name the true class only on objects carrying a distractor;
  // elsewhere they name the class nearest the local background.
  bool captions_helpful_on_distractors_only = false;
};

struct Scene {
  std::uint64_t seed = 0;
  SceneParams params;
  Rgb bg_top{}, bg_bottom{};
  std::vector<Shape> shapes;  // draw order
};

struct ObjectTruth {
  ShapeKind kind = ShapeKind::Rect;
  int class_id = 0;
  std::string caption;
  bool distractor = false;
  std::vector<Box> boxes;                        // full shape extent per frame
  std::vector<Mask> masks;                       // visible pixels per frame
  std::vector<std::vector<Keypoint>> keypoints;  // per frame; figures only
};

struct GroundTruth {
  std::vector<ObjectTruth> objects;
  std::vector<DepthMap> depth;
};

inline double depth_of_luma(double luma) { return 1.0 + luma / 32.0; }

// Throws std::domain_error for infeasible parameters.
Scene make_scene(std::uint64_t seed, const SceneParams& params);
VideoClip render_clip(const Scene& scene);
GroundTruth render_truth(const Scene& scene);

struct SceneSample {
  VideoClip clip;
  GroundTruth truth;
};
SceneSample generate_scene(std::uint64_t seed, const SceneParams& params);

// Index of the non-distractor object whose box best overlaps `detection`
// (IoU >= 0.1), or -1.
int match_object(const GroundTruth& gt, int frame, const Box& detection);

// Encoder oracle backed by ground truth. Target masks are cropped to the ROI.
class GroundTruthOracle final : public EncoderOracle {
 public:
  explicit GroundTruthOracle(const GroundTruth& gt) : gt_(gt) {}

  Mask target_mask(int frame_index, const Frame& original, const Roi& roi) const override;
  std::string caption(int frame_index, const Frame& original, const Roi& roi) const override;
  int class_label(int frame_index, const Frame& original, const Roi& roi) const override;
  std::vector<Keypoint> keypoints(int frame_index, const Frame& original, const Roi& roi) const override;

 private:
  const GroundTruth& gt_;
};

// Oracle for clips without ground truth: the task model run on the original.
class ModelOracle final : public EncoderOracle {
 public:
  explicit ModelOracle(const TaskModel& model) : model_(model) {}

  Mask target_mask(int frame_index, const Frame& original, const Roi& roi) const override;
  std::string caption(int frame_index, const Frame& original, const Roi& roi) const override;
  int class_label(int frame_index, const Frame& original, const Roi& roi) const override;
  std::vector<Keypoint> keypoints(int frame_index, const Frame& original, const Roi& roi) const override;

 private:
  const TaskModel& model_;
};

Mask crop_to_box(const Mask& m, const Box& box);

}  // namespace patvcm
