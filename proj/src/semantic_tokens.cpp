#include "patvcm/semantic_tokens.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "patvcm/errors.hpp"

namespace patvcm {
namespace {

void check_consumed(const BitReader& r, const char* what) {
  if (r.remaining() != 0) {
    throw StructuralError(std::string(what) + " record has " + std::to_string(r.remaining()) +
                          " bits beyond the derived ROI count");
  }
}

int axis_code(double coord, int origin, int extent) {
  const double rel = kSkeletonGrid * (coord - origin) / extent;
  return std::clamp(static_cast<int>(std::floor(rel)), 0, kSkeletonGrid - 1);
}

}  // namespace

std::uint8_t encode_class(int class_id) {
  if (class_id < 0 || class_id >= kNumClasses) {
    throw std::domain_error("class id " + std::to_string(class_id) + " outside [0, 80)");
  }
  return static_cast<std::uint8_t>(class_id);
}

int decode_class(std::uint8_t token) {
  if (token >= kNumClasses) throw StructuralError("class token " + std::to_string(token) + " outside [0, 80)");
  return token;
}

BitPayload pack_classes(std::span<const int> class_ids) {
  BitWriter w;
  for (int id : class_ids) w.write(encode_class(id), kClassBits);
  return std::move(w).finish();
}

std::vector<int> unpack_classes(const BitPayload& payload, std::size_t roi_count) {
  BitReader r(payload);
  std::vector<int> out(roi_count);
  for (int& id : out) id = decode_class(static_cast<std::uint8_t>(r.read(kClassBits)));
  check_consumed(r, "class");
  return out;
}

SkeletonToken quantize_skeleton(std::span<const Keypoint> keypoints, const Box& box) {
  if (box.w < 1 || box.h < 1) throw std::domain_error("skeleton box must be non-empty");
  if (keypoints.size() != kNumKeypoints) throw std::domain_error("skeleton needs 17 keypoints");
  SkeletonToken t;
  for (std::size_t k = 0; k < keypoints.size(); ++k) {
    t.codes[k][0] = static_cast<std::uint8_t>(axis_code(keypoints[k].y, box.y0, box.h));
    t.codes[k][1] = static_cast<std::uint8_t>(axis_code(keypoints[k].x, box.x0, box.w));
  }
  return t;
}

std::vector<Keypoint> dequantize_skeleton(const SkeletonToken& token, const Box& box) {
  if (box.w < 1 || box.h < 1) throw std::domain_error("skeleton box must be non-empty");
  std::vector<Keypoint> out(kNumKeypoints);
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k].y = box.y0 + (token.codes[k][0] + 0.5) * box.h / kSkeletonGrid;
    out[k].x = box.x0 + (token.codes[k][1] + 0.5) * box.w / kSkeletonGrid;
  }
  return out;
}

BitPayload pack_skeletons(std::span<const std::optional<SkeletonToken>> tokens) {
  BitWriter w;
  for (const auto& t : tokens) {
    w.write_bit(t.has_value());
    if (!t) continue;
    for (const auto& rc : t->codes) {
      w.write(rc[0], 3);
      w.write(rc[1], 3);
    }
  }
  return std::move(w).finish();
}

std::vector<std::optional<SkeletonToken>> unpack_skeletons(const BitPayload& payload, std::size_t roi_count) {
  BitReader r(payload);
  std::vector<std::optional<SkeletonToken>> out(roi_count);
  for (auto& t : out) {
    if (!r.read_bit()) continue;
    SkeletonToken s;
    for (auto& rc : s.codes) {
      rc[0] = static_cast<std::uint8_t>(r.read(3));
      rc[1] = static_cast<std::uint8_t>(r.read(3));
    }
    t = s;
  }
  check_consumed(r, "skeleton");
  return out;
}

TextEncoding encode_text(const std::string& caption) {
  TextEncoding e;
  e.truncated = caption.size() > static_cast<std::size_t>(kTextSymbols);
  const std::size_t n = std::min(caption.size(), static_cast<std::size_t>(kTextSymbols));
  for (std::size_t i = 0; i < n; ++i) {
    const auto ch = static_cast<unsigned char>(caption[i]);
    if (ch >= 0x20 && ch <= 0x7E) {
      e.token.symbols[i] = ch;
    } else {
      e.token.symbols[i] = kTextUnknown;
      e.substituted = true;
    }
  }
  return e;
}

std::string decode_text(const TextToken& token) {
  std::size_t end = token.symbols.size();
  while (end > 0 && token.symbols[end - 1] == kTextPad) --end;
  std::string s;
  for (std::size_t i = 0; i < end; ++i) {
    const std::uint8_t c = token.symbols[i];
    s.push_back(c >= 0x20 && c <= 0x7E ? static_cast<char>(c) : '?');
  }
  return s;
}

BitPayload pack_texts(std::span<const std::optional<TextToken>> tokens) {
  BitWriter w;
  for (const auto& t : tokens) {
    w.write_bit(t.has_value());
    if (!t) continue;
    for (std::uint8_t c : t->symbols) w.write(c, kTextSymbolBits);
  }
  return std::move(w).finish();
}

std::vector<std::optional<TextToken>> unpack_texts(const BitPayload& payload, std::size_t roi_count) {
  BitReader r(payload);
  std::vector<std::optional<TextToken>> out(roi_count);
  for (auto& t : out) {
    if (!r.read_bit()) continue;
    TextToken tok;
    for (auto& c : tok.symbols) c = static_cast<std::uint8_t>(r.read(kTextSymbolBits));
    t = tok;
  }
  check_consumed(r, "text");
  return out;
}

bool policy_decide(double encoder_iou_estimate, const AdaptivePolicy& policy) {
  switch (policy.mode) {
    case TextMode::None: return false;
    case TextMode::Uniform: return true;
    case TextMode::Adaptive: return encoder_iou_estimate < policy.hard_threshold;
  }
  return false;
}

double expected_bits(const AdaptivePolicy& policy, double hard_fraction) {
  if (hard_fraction < 0.0 || hard_fraction > 1.0) throw std::domain_error("hard fraction outside [0, 1]");
  switch (policy.mode) {
    case TextMode::None: return 1.0;
    case TextMode::Uniform: return 1.0 + kTextContentBits;
    case TextMode::Adaptive: return 1.0 + kTextContentBits * hard_fraction;
  }
  return 0.0;
}

}  // namespace patvcm
