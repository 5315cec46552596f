#include "patvcm/metrics.hpp"

#include <algorithm>
#include <numeric>

namespace patvcm {

double mean_of(std::span<const double> values) {
  if (values.empty()) return 0.0;
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double MatchResult::matched_iou() const {
  if (gt_count == 0) return 0.0;
  double s = 0;
  for (const auto& p : pairs) s += p.iou;
  return s / static_cast<double>(gt_count);
}

double MatchResult::matched_only_iou() const {
  if (pairs.empty()) return 0.0;
  double s = 0;
  for (const auto& p : pairs) s += p.iou;
  return s / static_cast<double>(pairs.size());
}

double MatchResult::recall_at(double threshold) const {
  if (gt_count == 0) return 0.0;
  const auto hits = std::count_if(pairs.begin(), pairs.end(), [&](const MatchPair& p) { return p.iou >= threshold; });
  return static_cast<double>(hits) / static_cast<double>(gt_count);
}

MatchResult match_detections(std::span<const Box> gt, std::span<const Box> pred) {
  std::vector<MatchPair> cand;
  for (std::size_t g = 0; g < gt.size(); ++g) {
    for (std::size_t p = 0; p < pred.size(); ++p) {
      const double iou = box_iou(gt[g], pred[p]);
      if (iou > 0.0) cand.push_back({static_cast<int>(g), static_cast<int>(p), iou});
    }
  }
  std::stable_sort(cand.begin(), cand.end(), [](const MatchPair& a, const MatchPair& b) {
    if (a.iou != b.iou) return a.iou > b.iou;
    if (a.gt != b.gt) return a.gt < b.gt;
    return a.pred < b.pred;
  });
  std::vector<bool> gt_used(gt.size()), pred_used(pred.size());
  MatchResult r;
  r.gt_count = gt.size();
  for (const auto& c : cand) {
    if (gt_used[static_cast<std::size_t>(c.gt)] || pred_used[static_cast<std::size_t>(c.pred)]) continue;
    gt_used[static_cast<std::size_t>(c.gt)] = true;
    pred_used[static_cast<std::size_t>(c.pred)] = true;
    r.pairs.push_back(c);
  }
  for (std::size_t g = 0; g < gt.size(); ++g) {
    if (!gt_used[g]) r.unmatched_gt.push_back(static_cast<int>(g));
  }
  for (std::size_t p = 0; p < pred.size(); ++p) {
    if (!pred_used[p]) r.unmatched_pred.push_back(static_cast<int>(p));
  }
  return r;
}

double optimal_assignment_iou(std::span<const Box> gt, std::span<const Box> pred) {
  // Pad predictions with "none" slots so every GT may stay unmatched.
  std::vector<int> slots(std::max(gt.size(), pred.size()));
  std::iota(slots.begin(), slots.end(), 0);
  double best = 0.0;
  do {
    double s = 0;
    for (std::size_t g = 0; g < gt.size(); ++g) {
      const auto p = static_cast<std::size_t>(slots[g]);
      if (p < pred.size()) s += box_iou(gt[g], pred[p]);
    }
    best = std::max(best, s);
  } while (std::next_permutation(slots.begin(), slots.end()));
  return best;
}

double normal_mae_deg(const NormalField& a, const NormalField& b, const Mask* valid) {
  if (a.x.rows() != b.x.rows() || a.x.cols() != b.x.cols()) throw std::domain_error("normal_mae_deg: shape mismatch");
  if (valid != nullptr && (valid->rows() != a.x.rows() || valid->cols() != a.x.cols())) {
    throw std::domain_error("normal_mae_deg: mask shape mismatch");
  }
  double sum = 0;
  std::size_t n = 0;
  for (Eigen::Index i = 0; i < a.x.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.x.cols(); ++j) {
      if (valid != nullptr && !(*valid)(i, j)) continue;
      const double dot = a.x(i, j) * b.x(i, j) + a.y(i, j) * b.y(i, j) + a.z(i, j) * b.z(i, j);
      sum += std::acos(std::clamp(dot, -1.0, 1.0));
      ++n;
    }
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n) * 180.0 / std::numbers::pi;
}

double mke(std::span<const Keypoint> pred, std::span<const Keypoint> gt) {
  if (pred.size() != gt.size()) throw std::domain_error("mke: keypoint counts differ");
  if (pred.empty()) return 0.0;
  double s = 0;
  for (std::size_t k = 0; k < pred.size(); ++k) s += std::hypot(pred[k].x - gt[k].x, pred[k].y - gt[k].y);
  return s / static_cast<double>(pred.size());
}

Bin difficulty_bin(double value, DifficultyTask task) {
  if (task == DifficultyTask::Segmentation) {
    if (value < 0.30) return Bin::Hard;
    if (value < 0.75) return Bin::Medium;
    return Bin::Easy;
  }
  if (value < 0.05) return Bin::Easy;
  if (value < 0.20) return Bin::Medium;
  return Bin::Hard;
}

const char* bin_name(Bin b) {
  switch (b) {
    case Bin::Easy: return "easy";
    case Bin::Medium: return "medium";
    case Bin::Hard: return "hard";
  }
  return "?";
}

SizeBin size_bin(long area) {
  if (area < 32L * 32) return SizeBin::Small;
  if (area < 96L * 96) return SizeBin::Medium;
  return SizeBin::Large;
}

const char* size_bin_name(SizeBin b) {
  switch (b) {
    case SizeBin::Small: return "small";
    case SizeBin::Medium: return "medium";
    case SizeBin::Large: return "large";
  }
  return "?";
}

}  // namespace patvcm
