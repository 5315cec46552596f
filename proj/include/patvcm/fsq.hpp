#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace patvcm {

using FsqCode = Eigen::VectorXi;

// Per-dimension level counts. Centers for level count L are (2k+1)/L - 1.
class FsqSpec {
 public:
  explicit FsqSpec(std::vector<int> levels);

  int dims() const { return static_cast<int>(levels_.size()); }
  int level(int i) const { return levels_[static_cast<std::size_t>(i)]; }
  const std::vector<int>& levels() const { return levels_; }
  std::uint64_t codebook_size() const { return size_; }

  bool operator==(const FsqSpec& o) const { return levels_ == o.levels_; }

 private:
  std::vector<int> levels_;
  std::uint64_t size_ = 1;
};

template <typename Scalar>
Scalar fsq_center(int k, int levels) {
  return static_cast<Scalar>(2 * k + 1) / static_cast<Scalar>(levels) - Scalar(1);
}

// Nearest center after clamping to [-1, 1]; ties go to the lower index.
template <typename Scalar>
int fsq_quantize_scalar(Scalar v, int levels) {
  const double x = std::clamp(static_cast<double>(v), -1.0, 1.0);
  const double pos = (x + 1.0) * levels / 2.0 - 0.5;
  const int k = static_cast<int>(std::ceil(pos - 0.5));
  return std::clamp(k, 0, levels - 1);
}

template <typename Derived>
FsqCode quantize(const Eigen::MatrixBase<Derived>& v, const FsqSpec& spec) {
  if (v.size() != spec.dims()) throw std::domain_error("fsq: vector dimension does not match levels");
  FsqCode code(spec.dims());
  for (int i = 0; i < spec.dims(); ++i) code[i] = fsq_quantize_scalar(v(i), spec.level(i));
  return code;
}

void validate_code(const FsqCode& code, const FsqSpec& spec);

template <typename Scalar = double>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> dequantize(const FsqCode& code, const FsqSpec& spec) {
  validate_code(code, spec);
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> v(spec.dims());
  for (int i = 0; i < spec.dims(); ++i) v[i] = fsq_center<Scalar>(code[i], spec.level(i));
  return v;
}

// Mixed radix, first dimension least significant.
std::uint64_t index_of(const FsqCode& code, const FsqSpec& spec);
FsqCode code_of(std::uint64_t index, const FsqSpec& spec);

}  // namespace patvcm
