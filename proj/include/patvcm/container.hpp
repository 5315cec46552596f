#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "patvcm/bitio.hpp"

namespace patvcm {

// .patv layout (all multi-byte integers big-endian):
//
//   "PATV"            4 bytes
//   version           u8
//   frames            u16
//   height            u16
//   width             u16
//   profile id        u8
//   stream count      u8
//   baseline bits     u32, followed by ceil(bits/8) payload bytes
//   stream_count x record:
//     type tag        u8
//     task id         u8
//     payload bits    u32, followed by ceil(bits/8) payload bytes
//
// Payloads are MSB-first with zero padding. Header and framing bytes do not
// count toward the rate; only baseline and record payload bits do.

inline constexpr std::array<std::uint8_t, 4> kMagic = {'P', 'A', 'T', 'V'};
inline constexpr std::uint8_t kFormatVersion = 1;

enum class AuxType : std::uint8_t {
  VisualResidual = 1,
  Prompt = 2,
  Text = 3,
  ClassLabel = 4,
  Skeleton = 5,
};

bool is_known_aux_type(std::uint8_t tag);
std::string aux_type_name(std::uint8_t tag);

struct ClipHeader {
  std::uint8_t version = kFormatVersion;
  std::uint16_t frames = 0;
  std::uint16_t height = 0;
  std::uint16_t width = 0;
  std::uint8_t baseline_profile_id = 0;
  std::uint8_t stream_count = 0;

  bool operator==(const ClipHeader&) const = default;
};

struct AuxStreamRecord {
  std::uint8_t type_tag = 0;
  std::uint8_t task_id = 0;
  BitPayload payload;

  bool known() const { return is_known_aux_type(type_tag); }
  std::uint32_t payload_bits() const { return payload.bits; }
  bool operator==(const AuxStreamRecord&) const = default;
};

struct Bitstream {
  ClipHeader header;
  BitPayload baseline;
  std::vector<AuxStreamRecord> records;

  std::uint64_t baseline_bits() const { return baseline.bits; }
  std::uint64_t aux_bits() const;
  std::uint64_t total_bits() const { return baseline_bits() + aux_bits(); }
  bool operator==(const Bitstream&) const = default;
};

std::vector<std::uint8_t> mux(const ClipHeader& header, const BitPayload& baseline,
                              std::span<const AuxStreamRecord> records);
inline std::vector<std::uint8_t> mux(const Bitstream& s) {
  return mux(s.header, s.baseline, s.records);
}

Bitstream demux(std::span<const std::uint8_t> bytes);

// Exact total_bits / (T*H*W).
struct BitsPerPixel {
  std::uint64_t bits = 0;
  std::uint64_t pixels = 1;

  double value() const { return static_cast<double>(bits) / static_cast<double>(pixels); }
  // Decimal rendering rounded half-up from the exact rational.
  std::string to_string(int decimals = 6) const;
};

BitsPerPixel bits_per_pixel(std::uint64_t total_bits, std::uint64_t frames, std::uint64_t height,
                            std::uint64_t width);

}  // namespace patvcm
