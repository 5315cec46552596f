#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "patvcm/bitio.hpp"
#include "patvcm/fsq.hpp"
#include "patvcm/image.hpp"

namespace patvcm {

// Geometry and quantization of the toy baseline tokenizer. Each latent cell
// covers spatial_factor x spatial_factor pixels over one temporal group and is
// described by six features: mean R, G, B, horizontal luma gradient, vertical
// luma gradient and temporal luma delta, all normalized to [-1, 1].
//
// The six features are a stand-in for a neural tokenizer's latent; only the
// grid geometry and the token rate are meant to be faithful.
struct CodecProfile {
  std::uint8_t id = 0;
  int temporal_factor = 4;
  int spatial_factor = 8;
  std::vector<int> feature_levels{8, 8, 8, 5, 5, 5};
  int token_bits = 16;

  FsqSpec spec() const { return FsqSpec(feature_levels); }
  std::string describe() const;
};

void validate_profile(const CodecProfile& p);

// Built-in ladder used for rate sweeps, finest first. Id 0 is the default.
const std::vector<CodecProfile>& builtin_profiles();
const CodecProfile& default_profile();
// Throws std::out_of_range for unknown ids.
const CodecProfile& profile_by_id(int id);

struct LatentDims {
  int t = 0;
  int h = 0;
  int w = 0;

  long count() const { return static_cast<long>(t) * h * w; }
  bool operator==(const LatentDims&) const = default;
};

LatentDims latent_shape(int frames, int height, int width, const CodecProfile& profile);

// Frames [first, first + count) of temporal group g: {0}, then runs of
// temporal_factor frames, the last run possibly shorter.
struct FrameRange {
  int first = 0;
  int count = 0;
};
FrameRange temporal_group(int group, int frames, const CodecProfile& profile);
int group_of_frame(int frame, const CodecProfile& profile);

struct LatentGrid {
  LatentDims dims;
  std::vector<std::uint16_t> tokens;

  std::uint16_t at(int t, int i, int j) const {
    return tokens[static_cast<std::size_t>((static_cast<long>(t) * dims.h + i) * dims.w + j)];
  }
  std::uint16_t& at(int t, int i, int j) {
    return tokens[static_cast<std::size_t>((static_cast<long>(t) * dims.h + i) * dims.w + j)];
  }
  bool operator==(const LatentGrid&) const = default;
};

inline constexpr double kGradientGain = 2.0;
inline constexpr double kTemporalGain = 2.0;

LatentGrid encode_clip(const VideoClip& clip, const CodecProfile& profile);
ReconClip decode_clip(const LatentGrid& latent, int frames, const CodecProfile& profile);

std::uint64_t baseline_bits(const LatentGrid& latent, const CodecProfile& profile);

BitPayload pack_latent(const LatentGrid& latent, const CodecProfile& profile);
LatentGrid unpack_latent(const BitPayload& payload, const LatentDims& dims, const CodecProfile& profile);

double psnr(const VideoClip& a, const VideoClip& b);

}  // namespace patvcm
