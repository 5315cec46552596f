#include "patvcm/container.hpp"

#include <algorithm>
#include <stdexcept>

#include "patvcm/errors.hpp"

namespace patvcm {
namespace {

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>((v >> s) & 0xFF));
}

void put_payload(std::vector<std::uint8_t>& out, const BitPayload& p, const std::string& what) {
  if (!padding_is_clean(p)) throw StructuralError(what + ": payload length or padding inconsistent");
  put_u32(out, p.bits);
  out.insert(out.end(), p.bytes.begin(), p.bytes.end());
}

void validate_header(const ClipHeader& h) {
  if (h.frames < 1) throw StructuralError("header: frame count must be at least 1");
  if (h.height == 0 || h.width == 0 || h.height % 8 != 0 || h.width % 8 != 0) {
    throw StructuralError("header: height and width must be positive multiples of 8");
  }
}

class Cursor {
 public:
  explicit Cursor(std::span<const std::uint8_t> b) : b_(b) {}

  std::uint8_t u8(const char* what) {
    need(1, what);
    return b_[pos_++];
  }
  std::uint16_t u16(const char* what) {
    need(2, what);
    const auto v = static_cast<std::uint16_t>((b_[pos_] << 8) | b_[pos_ + 1]);
    pos_ += 2;
    return v;
  }
  std::uint32_t u32(const std::string& what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | b_[pos_ + i];
    pos_ += 4;
    return v;
  }
  BitPayload payload(const std::string& what) {
    BitPayload p;
    p.bits = u32(what);
    const std::size_t n = (static_cast<std::size_t>(p.bits) + 7) / 8;
    need(n, what);
    p.bytes.assign(b_.begin() + static_cast<std::ptrdiff_t>(pos_),
                   b_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    if (!padding_is_clean(p)) throw StructuralError(what + ": nonzero padding bits");
    return p;
  }
  bool done() const { return pos_ == b_.size(); }

 private:
  void need(std::size_t n, const std::string& what) const {
    if (b_.size() - pos_ < n) throw StructuralError(what + ": truncated");
  }

  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

}  // namespace

bool is_known_aux_type(std::uint8_t tag) { return tag >= 1 && tag <= 5; }

std::string aux_type_name(std::uint8_t tag) {
  switch (static_cast<AuxType>(tag)) {
    case AuxType::VisualResidual: return "VISUAL_RESIDUAL";
    case AuxType::Prompt: return "PROMPT";
    case AuxType::Text: return "TEXT";
    case AuxType::ClassLabel: return "CLASS_LABEL";
    case AuxType::Skeleton: return "SKELETON";
  }
  return "UNKNOWN(" + std::to_string(tag) + ")";
}

std::uint64_t Bitstream::aux_bits() const {
  std::uint64_t sum = 0;
  for (const auto& r : records) sum += r.payload.bits;
  return sum;
}

std::vector<std::uint8_t> mux(const ClipHeader& header, const BitPayload& baseline,
                              std::span<const AuxStreamRecord> records) {
  validate_header(header);
  if (header.stream_count != records.size()) {
    throw StructuralError("stream_count " + std::to_string(header.stream_count) + " does not match " +
                          std::to_string(records.size()) + " records");
  }
  std::vector<std::uint8_t> out(kMagic.begin(), kMagic.end());
  out.push_back(header.version);
  put_u16(out, header.frames);
  put_u16(out, header.height);
  put_u16(out, header.width);
  out.push_back(header.baseline_profile_id);
  out.push_back(header.stream_count);
  put_payload(out, baseline, "baseline");
  for (std::size_t i = 0; i < records.size(); ++i) {
    out.push_back(records[i].type_tag);
    out.push_back(records[i].task_id);
    put_payload(out, records[i].payload, "record " + std::to_string(i));
  }
  return out;
}

Bitstream demux(std::span<const std::uint8_t> bytes) {
  Cursor c(bytes);
  for (std::size_t i = 0; i < kMagic.size(); ++i) {
    if (c.u8("magic") != kMagic[i]) throw StructuralError("bad magic: not a .patv stream");
  }
  Bitstream s;
  s.header.version = c.u8("version");
  if (s.header.version != kFormatVersion) {
    throw StructuralError("unsupported version " + std::to_string(s.header.version));
  }
  s.header.frames = c.u16("frames");
  s.header.height = c.u16("height");
  s.header.width = c.u16("width");
  s.header.baseline_profile_id = c.u8("profile id");
  s.header.stream_count = c.u8("stream count");
  validate_header(s.header);
  s.baseline = c.payload("baseline");
  s.records.reserve(s.header.stream_count);
  for (std::size_t i = 0; i < s.header.stream_count; ++i) {
    const std::string what = "record " + std::to_string(i);
    AuxStreamRecord r;
    r.type_tag = c.u8(what.c_str());
    r.task_id = c.u8(what.c_str());
    r.payload = c.payload(what);
    s.records.push_back(std::move(r));
  }
  if (!c.done()) throw StructuralError("trailing bytes after last record");
  return s;
}

std::string BitsPerPixel::to_string(int decimals) const {
  std::uint64_t scale = 1;
  for (int i = 0; i < decimals; ++i) scale *= 10;
  // round half up: floor((bits * scale * 2 + pixels) / (2 * pixels))
  const unsigned __int128 num = static_cast<unsigned __int128>(bits) * scale * 2 + pixels;
  const auto q = static_cast<std::uint64_t>(num / (static_cast<unsigned __int128>(pixels) * 2));
  std::string s = std::to_string(q / scale);
  if (decimals > 0) {
    std::string frac = std::to_string(q % scale);
    s += "." + std::string(static_cast<std::size_t>(decimals) - frac.size(), '0') + frac;
  }
  return s;
}

BitsPerPixel bits_per_pixel(std::uint64_t total_bits, std::uint64_t frames, std::uint64_t height,
                            std::uint64_t width) {
  const std::uint64_t pixels = frames * height * width;
  if (pixels == 0) throw std::domain_error("bits_per_pixel: T*H*W must be positive");
  return BitsPerPixel{total_bits, pixels};
}

}  // namespace patvcm
