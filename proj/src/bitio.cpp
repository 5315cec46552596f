#include "patvcm/bitio.hpp"

#include <stdexcept>
#include <string>

#include "patvcm/errors.hpp"

namespace patvcm {

void BitWriter::write(std::uint64_t value, unsigned width) {
  if (width > 64) throw std::domain_error("bit width exceeds 64");
  if (width < 64 && (value >> width) != 0) {
    throw std::domain_error("value " + std::to_string(value) + " does not fit in " +
                            std::to_string(width) + " bits");
  }
  for (unsigned i = width; i-- > 0;) {
    const unsigned bit = static_cast<unsigned>((value >> i) & 1u);
    const std::uint32_t byte = bits_ >> 3;
    if (byte == bytes_.size()) bytes_.push_back(0);
    if (bit) bytes_[byte] |= static_cast<std::uint8_t>(0x80u >> (bits_ & 7u));
    ++bits_;
  }
}

BitPayload BitWriter::finish() && {
  BitPayload p;
  p.bits = bits_;
  p.bytes = std::move(bytes_);
  return p;
}

BitReader::BitReader(std::span<const std::uint8_t> bytes, std::uint32_t bit_limit)
    : bytes_(bytes), limit_(bit_limit) {
  if (static_cast<std::uint64_t>(bit_limit) > static_cast<std::uint64_t>(bytes.size()) * 8) {
    throw StructuralError("bit limit exceeds buffer size");
  }
}

std::uint64_t BitReader::read(unsigned width) {
  if (width > 64) throw std::domain_error("bit width exceeds 64");
  if (width > remaining()) throw StructuralError("read past end of bit payload");
  std::uint64_t v = 0;
  for (unsigned i = 0; i < width; ++i) {
    const unsigned bit = (bytes_[pos_ >> 3] >> (7u - (pos_ & 7u))) & 1u;
    v = (v << 1) | bit;
    ++pos_;
  }
  return v;
}

BitPayload pack_bits(std::span<const BitField> fields) {
  BitWriter w;
  for (const auto& f : fields) w.write(f.value, f.width);
  return std::move(w).finish();
}

std::vector<std::uint64_t> unpack_bits(const BitPayload& payload, std::span<const unsigned> widths) {
  BitReader r(payload);
  std::vector<std::uint64_t> out;
  out.reserve(widths.size());
  for (unsigned w : widths) out.push_back(r.read(w));
  return out;
}

bool padding_is_clean(const BitPayload& payload) {
  const std::size_t need = (static_cast<std::size_t>(payload.bits) + 7) / 8;
  if (payload.bytes.size() != need) return false;
  const unsigned used = payload.bits & 7u;
  if (used == 0) return true;
  const std::uint8_t pad_mask = static_cast<std::uint8_t>(0xFFu >> used);
  return (payload.bytes.back() & pad_mask) == 0;
}

}  // namespace patvcm
