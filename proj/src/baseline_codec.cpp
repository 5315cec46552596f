#include "patvcm/baseline_codec.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "patvcm/errors.hpp"

namespace patvcm {
namespace {

constexpr int kFeatureDims = 6;
constexpr int kMeanR = 0;
constexpr int kGradX = 3;
constexpr int kGradY = 4;
constexpr int kDeltaT = 5;

std::vector<CodecProfile> make_ladder() {
  auto p = [](std::uint8_t id, std::vector<int> levels, int bits) {
    CodecProfile c;
    c.id = id;
    c.feature_levels = std::move(levels);
    c.token_bits = bits;
    return c;
  };
  return {
      p(0, {8, 8, 8, 5, 5, 5}, 16),
      p(1, {8, 8, 8, 3, 3, 3}, 14),
      p(2, {4, 4, 4, 3, 3, 3}, 11),
      p(3, {2, 2, 2, 3, 3, 3}, 8),
      p(4, {2, 2, 2, 2, 2, 2}, 6),
  };
}

// Code of the center with the smallest magnitude on the same side as k.
int innermost_code(int k, int levels) {
  if (levels % 2 == 1) return levels / 2;
  return k >= levels / 2 ? levels / 2 : levels / 2 - 1;
}

struct BlockGeometry {
  int s = 8;
  double center = 3.5;
  int half = 4;
};

// Distance between the centroids of the first and last floor(n/2) frames.
double temporal_span(int n) { return n >= 2 ? static_cast<double>(n - n / 2) : 1.0; }

struct CellModel {
  std::array<double, 3> mean{};
  double slope_x = 0.0;
  double slope_y = 0.0;
  double slope_t = 0.0;
};

CellModel cell_model(const Eigen::VectorXd& f, const BlockGeometry& g, int n) {
  CellModel m;
  for (int c = 0; c < 3; ++c) m.mean[static_cast<std::size_t>(c)] = (f[kMeanR + c] + 1.0) * 127.5;
  m.slope_x = f[kGradX] * 255.0 / kGradientGain / g.half;
  m.slope_y = f[kGradY] * 255.0 / kGradientGain / g.half;
  m.slope_t = n >= 2 ? f[kDeltaT] * 255.0 / kTemporalGain / temporal_span(n) : 0.0;
  return m;
}

double max_deviation(const CellModel& m, const BlockGeometry& g, int n) {
  return std::abs(m.slope_x) * g.center + std::abs(m.slope_y) * g.center +
         std::abs(m.slope_t) * (n - 1) / 2.0;
}

std::uint8_t to_pixel(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
}

}  // namespace

std::string CodecProfile::describe() const {
  std::ostringstream os;
  os << "id=" << int(id) << " levels=[";
  for (std::size_t i = 0; i < feature_levels.size(); ++i) os << (i ? "," : "") << feature_levels[i];
  os << "] token_bits=" << token_bits << " factors=" << temporal_factor << "x" << spatial_factor << "x"
     << spatial_factor;
  return os.str();
}

void validate_profile(const CodecProfile& p) {
  if (p.feature_levels.size() != kFeatureDims) throw std::domain_error("profile: six feature levels required");
  if (p.spatial_factor < 2 || p.spatial_factor % 2 != 0) throw std::domain_error("profile: spatial factor must be even");
  if (p.temporal_factor < 1) throw std::domain_error("profile: temporal factor must be positive");
  if (p.token_bits < 1 || p.token_bits > 16) throw std::domain_error("profile: token_bits must be in [1, 16]");
  const auto size = FsqSpec(p.feature_levels).codebook_size();
  if (size > (std::uint64_t{1} << p.token_bits)) {
    throw std::domain_error("profile: codebook size exceeds token_bits capacity");
  }
}

const std::vector<CodecProfile>& builtin_profiles() {
  static const std::vector<CodecProfile> ladder = make_ladder();
  return ladder;
}

const CodecProfile& default_profile() { return builtin_profiles().front(); }

const CodecProfile& profile_by_id(int id) {
  for (const auto& p : builtin_profiles()) {
    if (p.id == id) return p;
  }
  throw std::out_of_range("unknown baseline profile id " + std::to_string(id));
}

LatentDims latent_shape(int frames, int height, int width, const CodecProfile& profile) {
  const int s = profile.spatial_factor;
  if (frames < 1) throw std::domain_error("latent_shape: at least one frame required");
  if (height <= 0 || width <= 0 || height % s != 0 || width % s != 0) {
    throw std::domain_error("latent_shape: height and width must be positive multiples of " + std::to_string(s));
  }
  const int tf = profile.temporal_factor;
  return LatentDims{1 + (frames - 1 + tf - 1) / tf, height / s, width / s};
}

FrameRange temporal_group(int group, int frames, const CodecProfile& profile) {
  if (group == 0) return {0, 1};
  const int first = 1 + (group - 1) * profile.temporal_factor;
  const int last = std::min(frames - 1, group * profile.temporal_factor);
  return {first, std::max(0, last - first + 1)};
}

int group_of_frame(int frame, const CodecProfile& profile) {
  return frame == 0 ? 0 : 1 + (frame - 1) / profile.temporal_factor;
}

LatentGrid encode_clip(const VideoClip& clip, const CodecProfile& profile) {
  validate_profile(profile);
  const LatentDims dims = latent_shape(clip.num_frames(), clip.height(), clip.width(), profile);
  const FsqSpec spec = profile.spec();
  const BlockGeometry g{profile.spatial_factor, (profile.spatial_factor - 1) / 2.0, profile.spatial_factor / 2};
  const int s = g.s;

  std::vector<Grid<double>> luma;
  luma.reserve(clip.frames.size());
  for (const auto& f : clip.frames) luma.push_back(luminance(f));

  LatentGrid out;
  out.dims = dims;
  out.tokens.resize(static_cast<std::size_t>(dims.count()));

  for (int t = 0; t < dims.t; ++t) {
    const FrameRange fr = temporal_group(t, clip.num_frames(), profile);
    const int n = fr.count;
    const int half_t = n / 2;
    for (int i = 0; i < dims.h; ++i) {
      for (int j = 0; j < dims.w; ++j) {
        const int y0 = i * s;
        const int x0 = j * s;
        std::array<double, 3> sum{};
        double left = 0, right = 0, top = 0, bottom = 0, early = 0, late = 0;
        for (int r = 0; r < n; ++r) {
          const Frame& f = clip.frames[static_cast<std::size_t>(fr.first + r)];
          const auto& L = luma[static_cast<std::size_t>(fr.first + r)];
          double frame_luma = 0;
          for (int y = 0; y < s; ++y) {
            for (int x = 0; x < s; ++x) {
              for (int c = 0; c < 3; ++c) sum[static_cast<std::size_t>(c)] += f.rgb[c](y0 + y, x0 + x);
              const double l = L(y0 + y, x0 + x);
              (x < g.half ? left : right) += l;
              (y < g.half ? top : bottom) += l;
              frame_luma += l;
            }
          }
          if (r < half_t) early += frame_luma;
          if (r >= n - half_t) late += frame_luma;
        }
        const double cell_px = static_cast<double>(s) * s * n;
        const double half_px = cell_px / 2.0;
        Eigen::VectorXd feat(kFeatureDims);
        for (int c = 0; c < 3; ++c) feat[c] = sum[static_cast<std::size_t>(c)] / cell_px / 127.5 - 1.0;
        feat[kGradX] = (right - left) / half_px / 255.0 * kGradientGain;
        feat[kGradY] = (bottom - top) / half_px / 255.0 * kGradientGain;
        feat[kDeltaT] = half_t > 0 ? (late - early) / (static_cast<double>(s) * s * half_t) / 255.0 * kTemporalGain : 0.0;

        FsqCode code = quantize(feat, spec);

        // Pull ramps inward until the block fits in [0, 255] so that decoding
        // never clips; this keeps re-encoding of a decoded clip idempotent.
        Eigen::VectorXd q = dequantize(code, spec);
        CellModel m = cell_model(q, g, n);
        double headroom = std::numeric_limits<double>::max();
        for (double mc : m.mean) headroom = std::min({headroom, mc, 255.0 - mc});
        while (max_deviation(m, g, n) > headroom) {
          int pick = -1;
          double biggest = 0.0;
          const std::array<std::pair<int, double>, 3> contrib = {{
              {kGradX, std::abs(m.slope_x) * g.center},
              {kGradY, std::abs(m.slope_y) * g.center},
              {kDeltaT, std::abs(m.slope_t) * (n - 1) / 2.0},
          }};
          for (const auto& [dim, amount] : contrib) {
            const int target = innermost_code(code[dim], spec.level(dim));
            if (code[dim] != target && amount > biggest) {
              biggest = amount;
              pick = dim;
            }
          }
          if (pick < 0) break;
          code[pick] += code[pick] > innermost_code(code[pick], spec.level(pick)) ? -1 : 1;
          q = dequantize(code, spec);
          m = cell_model(q, g, n);
        }
        out.at(t, i, j) = static_cast<std::uint16_t>(index_of(code, spec));
      }
    }
  }
  return out;
}

ReconClip decode_clip(const LatentGrid& latent, int frames, const CodecProfile& profile) {
  validate_profile(profile);
  const FsqSpec spec = profile.spec();
  const int s = profile.spatial_factor;
  const BlockGeometry g{s, (s - 1) / 2.0, s / 2};
  if (latent.tokens.size() != static_cast<std::size_t>(latent.dims.count())) {
    throw StructuralError("latent grid token count does not match its dimensions");
  }
  if (frames < 1 || 1 + (frames - 1 + profile.temporal_factor - 1) / profile.temporal_factor != latent.dims.t) {
    throw StructuralError("frame count inconsistent with latent temporal size");
  }
  const int H = latent.dims.h * s;
  const int W = latent.dims.w * s;
  ReconClip out;
  out.frames.assign(static_cast<std::size_t>(frames), Frame(H, W));

  for (int t = 0; t < latent.dims.t; ++t) {
    const FrameRange fr = temporal_group(t, frames, profile);
    const int n = fr.count;
    for (int i = 0; i < latent.dims.h; ++i) {
      for (int j = 0; j < latent.dims.w; ++j) {
        const std::uint16_t token = latent.at(t, i, j);
        if (token >= spec.codebook_size()) {
          throw StructuralError("token " + std::to_string(token) + " outside codebook at cell (" +
                                std::to_string(t) + "," + std::to_string(i) + "," + std::to_string(j) + ")");
        }
        const CellModel m = cell_model(dequantize(code_of(token, spec), spec), g, n);
        for (int r = 0; r < n; ++r) {
          Frame& f = out.frames[static_cast<std::size_t>(fr.first + r)];
          const double dt = m.slope_t * (r - (n - 1) / 2.0);
          for (int y = 0; y < s; ++y) {
            for (int x = 0; x < s; ++x) {
              const double ramp = m.slope_x * (x - g.center) + m.slope_y * (y - g.center) + dt;
              for (int c = 0; c < 3; ++c) {
                f.rgb[c](i * s + y, j * s + x) = to_pixel(m.mean[static_cast<std::size_t>(c)] + ramp);
              }
            }
          }
        }
      }
    }
  }
  return out;
}

std::uint64_t baseline_bits(const LatentGrid& latent, const CodecProfile& profile) {
  return static_cast<std::uint64_t>(latent.dims.count()) * static_cast<std::uint64_t>(profile.token_bits);
}

BitPayload pack_latent(const LatentGrid& latent, const CodecProfile& profile) {
  BitWriter w;
  for (std::uint16_t tok : latent.tokens) w.write(tok, static_cast<unsigned>(profile.token_bits));
  return std::move(w).finish();
}

LatentGrid unpack_latent(const BitPayload& payload, const LatentDims& dims, const CodecProfile& profile) {
  const std::uint64_t expected = static_cast<std::uint64_t>(dims.count()) * profile.token_bits;
  if (payload.bits != expected) {
    throw StructuralError("baseline payload has " + std::to_string(payload.bits) + " bits, expected " +
                          std::to_string(expected));
  }
  LatentGrid g;
  g.dims = dims;
  g.tokens.resize(static_cast<std::size_t>(dims.count()));
  BitReader r(payload);
  for (auto& tok : g.tokens) tok = static_cast<std::uint16_t>(r.read(static_cast<unsigned>(profile.token_bits)));
  return g;
}

double psnr(const VideoClip& a, const VideoClip& b) {
  check_same_shape(a, b);
  double sse = 0.0;
  double count = 0.0;
  for (std::size_t f = 0; f < a.frames.size(); ++f) {
    for (int c = 0; c < 3; ++c) {
      const auto d = a.frames[f].rgb[c].cast<double>() - b.frames[f].rgb[c].cast<double>();
      sse += d.square().sum();
      count += static_cast<double>(d.size());
    }
  }
  if (sse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(255.0 * 255.0 / (sse / count));
}

}  // namespace patvcm
