#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "patvcm/image.hpp"
#include "patvcm/scene.hpp"

namespace patvcm {

// P6 / P5 with maxval 255. Throws StructuralError on malformed input.
void write_ppm(const std::filesystem::path& path, const Frame& frame);
Frame read_ppm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const Mask& mask);
Mask read_pgm_mask(const std::filesystem::path& path);
void write_depth(const std::filesystem::path& path, const DepthMap& depth);
DepthMap read_depth(const std::filesystem::path& path, int height, int width);

// Clip directory: manifest.txt ("T=.. H=.. W=.. seed=.." then one frame path
// per line, relative to the manifest) plus frame_XX.ppm.
void write_clip(const std::filesystem::path& dir, const VideoClip& clip);
VideoClip read_clip(const std::filesystem::path& manifest);

// gt/ sidecars next to the manifest: annotations.txt, object masks as P5 and
// per-frame depth as little-endian float32.
void write_truth(const std::filesystem::path& dir, const GroundTruth& gt);
// Empty when the clip has no gt/ directory.
std::optional<GroundTruth> read_truth(const std::filesystem::path& clip_dir, int frames, int height, int width);

// corpus.txt lists clip directories relative to the corpus root.
void write_corpus_index(const std::filesystem::path& root, const std::vector<std::string>& clip_dirs);
std::vector<std::filesystem::path> read_corpus_index(const std::filesystem::path& root);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

}  // namespace patvcm
