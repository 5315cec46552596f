#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace patvcm {

// A run of bits packed MSB-first, zero-padded to a byte boundary.
struct BitPayload {
  std::vector<std::uint8_t> bytes;
  std::uint32_t bits = 0;

  bool operator==(const BitPayload&) const = default;
};

struct BitField {
  std::uint64_t value = 0;
  unsigned width = 0;
};

// MSB-first bit writer. Widths up to 64 bits per call.
class BitWriter {
 public:
  void write(std::uint64_t value, unsigned width);
  void write_bit(bool bit) { write(bit ? 1u : 0u, 1); }
  std::uint32_t bit_count() const { return bits_; }
  BitPayload finish() &&;
  const std::vector<std::uint8_t>& bytes() const { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
  std::uint32_t bits_ = 0;
};

class BitReader {
 public:
  BitReader(std::span<const std::uint8_t> bytes, std::uint32_t bit_limit);
  explicit BitReader(const BitPayload& p) : BitReader(p.bytes, p.bits) {}

  std::uint64_t read(unsigned width);
  bool read_bit() { return read(1) != 0; }
  std::uint32_t position() const { return pos_; }
  std::uint32_t remaining() const { return limit_ - pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::uint32_t limit_;
  std::uint32_t pos_ = 0;
};

// Throws std::domain_error when a value does not fit its width.
BitPayload pack_bits(std::span<const BitField> fields);
std::vector<std::uint64_t> unpack_bits(const BitPayload& payload, std::span<const unsigned> widths);

// True when every bit past payload.bits in the last byte is zero and the byte
// count matches ceil(bits / 8).
bool padding_is_clean(const BitPayload& payload);

}  // namespace patvcm
