#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "patvcm/bitio.hpp"
#include "patvcm/image.hpp"

namespace patvcm {

inline constexpr int kNumClasses = 80;
inline constexpr unsigned kClassBits = 7;

// Throws std::domain_error for ids outside [0, 80).
std::uint8_t encode_class(int class_id);
int decode_class(std::uint8_t token);

BitPayload pack_classes(std::span<const int> class_ids);
std::vector<int> unpack_classes(const BitPayload& payload, std::size_t roi_count);

inline constexpr int kNumKeypoints = 17;
inline constexpr int kSkeletonGrid = 8;
inline constexpr unsigned kSkeletonBits = 102;

struct SkeletonToken {
  // (row code, col code) per keypoint, each in [0, 8).
  std::array<std::array<std::uint8_t, 2>, kNumKeypoints> codes{};
  bool operator==(const SkeletonToken&) const = default;
};

// Per axis code = floor(8 * (coord - origin) / extent), clamped to [0, 7].
// Throws std::domain_error on an empty box or a keypoint count other than 17.
SkeletonToken quantize_skeleton(std::span<const Keypoint> keypoints, const Box& box);
// Cell centers.
std::vector<Keypoint> dequantize_skeleton(const SkeletonToken& token, const Box& box);

// Per ROI: a presence bit, then 102 bits when present.
BitPayload pack_skeletons(std::span<const std::optional<SkeletonToken>> tokens);
std::vector<std::optional<SkeletonToken>> unpack_skeletons(const BitPayload& payload, std::size_t roi_count);

inline constexpr int kTextSymbols = 19;
inline constexpr unsigned kTextSymbolBits = 8;
inline constexpr unsigned kTextContentBits = kTextSymbols * kTextSymbolBits;  // 152

// Charset: 0 pads, 1 stands for any character outside printable ASCII,
// 0x20-0x7E map to themselves; the remaining codes are reserved.
inline constexpr std::uint8_t kTextPad = 0;
inline constexpr std::uint8_t kTextUnknown = 1;

struct TextToken {
  std::array<std::uint8_t, kTextSymbols> symbols{};
  bool operator==(const TextToken&) const = default;
};

struct TextEncoding {
  TextToken token;
  bool substituted = false;  // some character mapped to kTextUnknown
  bool truncated = false;
};

TextEncoding encode_text(const std::string& caption);
// Trailing pads dropped; unknown symbols render as '?'.
std::string decode_text(const TextToken& token);

// Per ROI: a presence bit, then 152 bits when present.
BitPayload pack_texts(std::span<const std::optional<TextToken>> tokens);
std::vector<std::optional<TextToken>> unpack_texts(const BitPayload& payload, std::size_t roi_count);

enum class TextMode { None, Uniform, Adaptive };

struct AdaptivePolicy {
  TextMode mode = TextMode::None;
  double hard_threshold = 0.30;
};

// Adaptive sends content iff the estimate is strictly below the threshold.
bool policy_decide(double encoder_iou_estimate, const AdaptivePolicy& policy);
// Expected bits per ROI including the presence bit, given hard fraction p.
double expected_bits(const AdaptivePolicy& policy, double hard_fraction);

}  // namespace patvcm
