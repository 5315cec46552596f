#include "patvcm/clip_io.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "patvcm/errors.hpp"

namespace patvcm {
namespace fs = std::filesystem;
namespace {

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return in;
}

// Header fields of a binary netpbm file, skipping comments.
int next_int(std::istream& in, const fs::path& path) {
  int c;
  while ((c = in.peek()) != EOF) {
    if (c == '#') {
      std::string skip;
      std::getline(in, skip);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      break;
    }
  }
  int v = -1;
  if (!(in >> v) || v < 0) throw StructuralError("malformed netpbm header in " + path.string());
  return v;
}

struct Netpbm {
  int width = 0, height = 0;
  std::vector<std::uint8_t> data;
};

Netpbm read_netpbm(const fs::path& path, const char* magic, int channels) {
  auto in = open_in(path);
  char m[2] = {};
  in.read(m, 2);
  if (!in || m[0] != magic[0] || m[1] != magic[1]) throw StructuralError(path.string() + " is not " + magic);
  Netpbm p;
  p.width = next_int(in, path);
  p.height = next_int(in, path);
  if (next_int(in, path) != 255) throw StructuralError(path.string() + ": only maxval 255 is supported");
  in.get();
  p.data.resize(static_cast<std::size_t>(p.width) * p.height * channels);
  in.read(reinterpret_cast<char*>(p.data.data()), static_cast<std::streamsize>(p.data.size()));
  if (in.gcount() != static_cast<std::streamsize>(p.data.size())) throw StructuralError(path.string() + " is truncated");
  return p;
}

}  // namespace

void write_ppm(const fs::path& path, const Frame& frame) {
  auto out = open_out(path);
  out << "P6\n" << frame.width() << ' ' << frame.height() << "\n255\n";
  std::vector<std::uint8_t> buf(static_cast<std::size_t>(frame.width()) * frame.height() * 3);
  std::size_t k = 0;
  for (int y = 0; y < frame.height(); ++y) {
    for (int x = 0; x < frame.width(); ++x) {
      for (int c = 0; c < 3; ++c) buf[k++] = frame.rgb[c](y, x);
    }
  }
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

Frame read_ppm(const fs::path& path) {
  const Netpbm p = read_netpbm(path, "P6", 3);
  Frame f(p.height, p.width);
  std::size_t k = 0;
  for (int y = 0; y < p.height; ++y) {
    for (int x = 0; x < p.width; ++x) {
      for (int c = 0; c < 3; ++c) f.rgb[c](y, x) = p.data[k++];
    }
  }
  return f;
}

void write_pgm(const fs::path& path, const Mask& mask) {
  auto out = open_out(path);
  out << "P5\n" << mask.cols() << ' ' << mask.rows() << "\n255\n";
  std::vector<std::uint8_t> buf(static_cast<std::size_t>(mask.size()));
  std::size_t k = 0;
  for (Eigen::Index y = 0; y < mask.rows(); ++y) {
    for (Eigen::Index x = 0; x < mask.cols(); ++x) buf[k++] = mask(y, x) ? 255 : 0;
  }
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

Mask read_pgm_mask(const fs::path& path) {
  const Netpbm p = read_netpbm(path, "P5", 1);
  Mask m(p.height, p.width);
  std::size_t k = 0;
  for (int y = 0; y < p.height; ++y) {
    for (int x = 0; x < p.width; ++x) m(y, x) = p.data[k++] >= 128;
  }
  return m;
}

void write_depth(const fs::path& path, const DepthMap& depth) {
  auto out = open_out(path);
  for (Eigen::Index y = 0; y < depth.rows(); ++y) {
    for (Eigen::Index x = 0; x < depth.cols(); ++x) {
      std::uint32_t bits;
      const float v = depth(y, x);
      std::memcpy(&bits, &v, 4);
      const char le[4] = {static_cast<char>(bits), static_cast<char>(bits >> 8), static_cast<char>(bits >> 16),
                          static_cast<char>(bits >> 24)};
      out.write(le, 4);
    }
  }
}

DepthMap read_depth(const fs::path& path, int height, int width) {
  const auto bytes = read_file(path);
  if (bytes.size() != static_cast<std::size_t>(height) * width * 4) {
    throw StructuralError(path.string() + ": depth grid size does not match the clip");
  }
  DepthMap d(height, width);
  std::size_t k = 0;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x, k += 4) {
      const std::uint32_t bits = bytes[k] | (bytes[k + 1] << 8) | (bytes[k + 2] << 16) |
                                 (static_cast<std::uint32_t>(bytes[k + 3]) << 24);
      float v;
      std::memcpy(&v, &bits, 4);
      d(y, x) = v;
    }
  }
  return d;
}

void write_clip(const fs::path& dir, const VideoClip& clip) {
  fs::create_directories(dir);
  auto man = open_out(dir / "manifest.txt");
  man << "T=" << clip.num_frames() << " H=" << clip.height() << " W=" << clip.width() << " seed=" << clip.seed << '\n';
  for (int f = 0; f < clip.num_frames(); ++f) {
    char name[32];
    std::snprintf(name, sizeof name, "frame_%03d.ppm", f);
    write_ppm(dir / name, clip.frames[static_cast<std::size_t>(f)]);
    man << name << '\n';
  }
}

VideoClip read_clip(const fs::path& manifest) {
  auto in = open_in(manifest);
  std::string header;
  std::getline(in, header);
  int t = -1, h = -1, w = -1;
  unsigned long long seed = 0;
  if (std::sscanf(header.c_str(), "T=%d H=%d W=%d seed=%llu", &t, &h, &w, &seed) < 3 || t < 1) {
    throw StructuralError(manifest.string() + ": bad manifest header");
  }
  VideoClip clip;
  clip.seed = seed;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    Frame f = read_ppm(manifest.parent_path() / line);
    if (f.height() != h || f.width() != w) throw StructuralError(line + ": frame size differs from manifest");
    clip.frames.push_back(std::move(f));
  }
  if (clip.num_frames() != t) throw StructuralError(manifest.string() + ": frame count differs from header");
  return clip;
}

void write_truth(const fs::path& dir, const GroundTruth& gt) {
  const fs::path g = dir / "gt";
  fs::create_directories(g);
  auto ann = open_out(g / "annotations.txt");
  ann << "objects " << gt.objects.size() << '\n';
  for (std::size_t i = 0; i < gt.objects.size(); ++i) {
    const ObjectTruth& o = gt.objects[i];
    ann << "object " << i << " kind " << shape_name(o.kind) << " class " << o.class_id << " distractor "
        << (o.distractor ? 1 : 0) << " caption " << o.caption << '\n';
    for (std::size_t f = 0; f < o.boxes.size(); ++f) {
      const Box& b = o.boxes[f];
      ann << "box " << f << ' ' << b.x0 << ' ' << b.y0 << ' ' << b.w << ' ' << b.h << '\n';
      char name[48];
      std::snprintf(name, sizeof name, "mask_%02zu_%03zu.pgm", i, f);
      write_pgm(g / name, o.masks[f]);
    }
    for (std::size_t f = 0; f < o.keypoints.size(); ++f) {
      ann << "keypoints " << f;
      ann.precision(17);
      for (const Keypoint& k : o.keypoints[f]) ann << ' ' << k.x << ' ' << k.y;
      ann << '\n';
    }
  }
  for (std::size_t f = 0; f < gt.depth.size(); ++f) {
    char name[32];
    std::snprintf(name, sizeof name, "depth_%03zu.f32", f);
    write_depth(g / name, gt.depth[f]);
  }
}

std::optional<GroundTruth> read_truth(const fs::path& clip_dir, int frames, int height, int width) {
  const fs::path g = clip_dir / "gt";
  if (!fs::exists(g / "annotations.txt")) return std::nullopt;
  auto in = open_in(g / "annotations.txt");
  GroundTruth gt;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "object") {
      ObjectTruth o;
      std::size_t idx;
      std::string k, kind, c, d, cap;
      int distractor = 0;
      ls >> idx >> k >> kind >> c >> o.class_id >> d >> distractor >> cap;
      std::getline(ls, o.caption);
      if (!o.caption.empty() && o.caption.front() == ' ') o.caption.erase(0, 1);
      o.kind = kind == "figure" ? ShapeKind::Figure : kind == "ellipse" ? ShapeKind::Ellipse : ShapeKind::Rect;
      o.distractor = distractor != 0;
      gt.objects.push_back(std::move(o));
    } else if (tag == "box") {
      if (gt.objects.empty()) throw StructuralError("annotations: box before object");
      ObjectTruth& o = gt.objects.back();
      std::size_t f;
      Box b;
      ls >> f >> b.x0 >> b.y0 >> b.w >> b.h;
      b.confidence = 1.0;
      o.boxes.push_back(b);
      char name[48];
      std::snprintf(name, sizeof name, "mask_%02zu_%03zu.pgm", gt.objects.size() - 1, f);
      o.masks.push_back(read_pgm_mask(g / name));
    } else if (tag == "keypoints") {
      if (gt.objects.empty()) throw StructuralError("annotations: keypoints before object");
      std::size_t f;
      ls >> f;
      std::vector<Keypoint> kps;
      Keypoint k;
      while (ls >> k.x >> k.y) kps.push_back(k);
      gt.objects.back().keypoints.push_back(std::move(kps));
    }
  }
  for (int f = 0; f < frames; ++f) {
    char name[32];
    std::snprintf(name, sizeof name, "depth_%03d.f32", f);
    gt.depth.push_back(read_depth(g / name, height, width));
  }
  return gt;
}

void write_corpus_index(const fs::path& root, const std::vector<std::string>& clip_dirs) {
  fs::create_directories(root);
  auto out = open_out(root / "corpus.txt");
  for (const auto& d : clip_dirs) out << d << '\n';
}

std::vector<fs::path> read_corpus_index(const fs::path& root) {
  auto in = open_in(root / "corpus.txt");
  std::vector<fs::path> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(root / line);
  }
  return out;
}

std::vector<std::uint8_t> read_file(const fs::path& path) {
  auto in = open_in(path);
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_file(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
  auto out = open_out(path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace patvcm
