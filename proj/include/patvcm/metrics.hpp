#pragma once

#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "patvcm/image.hpp"

namespace patvcm {

inline constexpr double kDepthValidEps = 1e-6;
inline constexpr double kVarianceEps = 1e-12;

// Both empty counts as perfect agreement.
inline double mask_iou(const Mask& a, const Mask& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw std::domain_error("mask_iou: shape mismatch");
  const auto inter = (a && b).count();
  const auto uni = (a || b).count();
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

double mean_of(std::span<const double> values);

struct MatchPair {
  int gt = 0;
  int pred = 0;
  double iou = 0.0;
};

struct MatchResult {
  std::vector<MatchPair> pairs;
  std::vector<int> unmatched_gt;
  std::vector<int> unmatched_pred;
  std::size_t gt_count = 0;

  // Unmatched ground truth contributes zero.
  double matched_iou() const;
  // Mean over matched pairs only.
  double matched_only_iou() const;
  double recall_at(double threshold) const;
};

// Greedy one-to-one matching by descending IoU, then GT index, then prediction
// index. Pairs with zero overlap are never matched.
MatchResult match_detections(std::span<const Box> gt, std::span<const Box> pred);

// Best total IoU over all one-to-one assignments, by enumeration. Small inputs only.
double optimal_assignment_iou(std::span<const Box> gt, std::span<const Box> pred);

struct ScaleShift {
  double s = 1.0;
  double t = 0.0;
  bool degenerate = false;
};

// Least squares fit of s*d + t to d_star over pixels where valid is set.
template <typename DerivedA, typename DerivedB, typename DerivedM>
ScaleShift align_scale_shift(const Eigen::ArrayBase<DerivedA>& d, const Eigen::ArrayBase<DerivedB>& d_star,
                             const Eigen::ArrayBase<DerivedM>& valid) {
  double n = 0, sd = 0, sds = 0;
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    for (Eigen::Index j = 0; j < d.cols(); ++j) {
      if (!valid(i, j)) continue;
      n += 1;
      sd += d(i, j);
      sds += d_star(i, j);
    }
  }
  ScaleShift out;
  if (n == 0) {
    out.degenerate = true;
    return out;
  }
  const double md = sd / n, mds = sds / n;
  double var = 0, cov = 0;
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    for (Eigen::Index j = 0; j < d.cols(); ++j) {
      if (!valid(i, j)) continue;
      const double a = d(i, j) - md;
      var += a * a;
      cov += a * (d_star(i, j) - mds);
    }
  }
  var /= n;
  cov /= n;
  if (n < 2 || var <= kVarianceEps) {
    out.t = mds - md;
    out.degenerate = true;
    return out;
  }
  out.s = cov / var;
  out.t = mds - out.s * md;
  return out;
}

template <typename DerivedA, typename DerivedB>
ScaleShift align_scale_shift(const Eigen::ArrayBase<DerivedA>& d, const Eigen::ArrayBase<DerivedB>& d_star) {
  return align_scale_shift(d, d_star, d_star > kDepthValidEps);
}

struct DepthScores {
  double absrel = 0.0;
  double delta = 0.0;
  double rmse = 0.0;
  std::size_t count = 0;
};

// Over pixels with d_star > 1e-6 and valid set. Empty when nothing qualifies.
template <typename DerivedA, typename DerivedB, typename DerivedM>
std::optional<DepthScores> depth_scores(const Eigen::ArrayBase<DerivedA>& pred, const Eigen::ArrayBase<DerivedB>& d_star,
                                        const Eigen::ArrayBase<DerivedM>& valid, double threshold = 1.25) {
  DepthScores s;
  double abs_sum = 0, sq_sum = 0, hits = 0;
  for (Eigen::Index i = 0; i < pred.rows(); ++i) {
    for (Eigen::Index j = 0; j < pred.cols(); ++j) {
      const double g = d_star(i, j);
      if (!valid(i, j) || !(g > kDepthValidEps)) continue;
      const double p = pred(i, j);
      abs_sum += std::abs(p - g) / g;
      sq_sum += (p - g) * (p - g);
      if (p > 0 && std::max(p / g, g / p) < threshold) hits += 1;
      ++s.count;
    }
  }
  if (s.count == 0) return std::nullopt;
  const double n = static_cast<double>(s.count);
  s.absrel = abs_sum / n;
  s.delta = hits / n;
  s.rmse = std::sqrt(sq_sum / n);
  return s;
}

template <typename DerivedA, typename DerivedB>
std::optional<double> absrel(const Eigen::ArrayBase<DerivedA>& pred, const Eigen::ArrayBase<DerivedB>& d_star) {
  const auto s = depth_scores(pred, d_star, Mask::Constant(pred.rows(), pred.cols(), true));
  return s ? std::optional<double>(s->absrel) : std::nullopt;
}

template <typename DerivedA, typename DerivedB>
std::optional<double> delta_threshold(const Eigen::ArrayBase<DerivedA>& pred, const Eigen::ArrayBase<DerivedB>& d_star,
                                      double threshold = 1.25) {
  const auto s = depth_scores(pred, d_star, Mask::Constant(pred.rows(), pred.cols(), true), threshold);
  return s ? std::optional<double>(s->delta) : std::nullopt;
}

template <typename DerivedA, typename DerivedB>
std::optional<double> rmse(const Eigen::ArrayBase<DerivedA>& pred, const Eigen::ArrayBase<DerivedB>& d_star) {
  const auto s = depth_scores(pred, d_star, Mask::Constant(pred.rows(), pred.cols(), true));
  return s ? std::optional<double>(s->rmse) : std::nullopt;
}

// Unit normals (-dd/dx, -dd/dy, 1) normalized; central differences inside,
// one-sided at the borders.
struct NormalField {
  Grid<double> x, y, z;
};

template <typename Derived>
NormalField normals_from_depth(const Eigen::ArrayBase<Derived>& d) {
  const Eigen::Index h = d.rows(), w = d.cols();
  if (h < 3 || w < 3) throw std::domain_error("normals need at least 3x3 support");
  NormalField n{Grid<double>(h, w), Grid<double>(h, w), Grid<double>(h, w)};
  for (Eigen::Index i = 0; i < h; ++i) {
    for (Eigen::Index j = 0; j < w; ++j) {
      double gx, gy;
      if (j == 0) gx = double(d(i, 1)) - d(i, 0);
      else if (j == w - 1) gx = double(d(i, j)) - d(i, j - 1);
      else gx = (double(d(i, j + 1)) - d(i, j - 1)) / 2.0;
      if (i == 0) gy = double(d(1, j)) - d(0, j);
      else if (i == h - 1) gy = double(d(i, j)) - d(i - 1, j);
      else gy = (double(d(i + 1, j)) - d(i - 1, j)) / 2.0;
      const Eigen::Vector3d v = Eigen::Vector3d(-gx, -gy, 1.0).normalized();
      n.x(i, j) = v.x();
      n.y(i, j) = v.y();
      n.z(i, j) = v.z();
    }
  }
  return n;
}

// Mean angle in degrees over pixels where valid is set (all when empty).
double normal_mae_deg(const NormalField& a, const NormalField& b, const Mask* valid = nullptr);

// Mean Euclidean keypoint distance. Throws std::domain_error on count mismatch.
double mke(std::span<const Keypoint> pred, std::span<const Keypoint> gt);

enum class DifficultyTask { Segmentation, Depth };
enum class Bin { Easy, Medium, Hard };

// Segmentation IoU: hard < 0.30 <= medium < 0.75 <= easy.
// Depth AbsRel: easy < 0.05 <= medium < 0.20 <= hard.
Bin difficulty_bin(double value, DifficultyTask task);
const char* bin_name(Bin b);

enum class SizeBin { Small, Medium, Large };
// Object area in pixels: small < 32^2 <= medium < 96^2 <= large.
SizeBin size_bin(long area);
const char* size_bin_name(SizeBin b);

}  // namespace patvcm
