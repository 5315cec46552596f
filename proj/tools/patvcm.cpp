// patvcm command-line driver: synthetic corpora, encode/decode, inspection,
// evaluation campaigns and rate sweeps.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "patvcm/bridge.hpp"
#include "patvcm/clip_io.hpp"
#include "patvcm/errors.hpp"
#include "patvcm/evaluate.hpp"
#include "patvcm/pipeline.hpp"
#include "patvcm/scene.hpp"
#include "patvcm/taskmodels.hpp"

namespace fs = std::filesystem;
using namespace patvcm;

namespace {

constexpr int kExitStructural = 2;
constexpr int kExitConfig = 3;

struct SeedRange {
  std::uint64_t first = 0;
  std::uint64_t last = 0;
};

SeedRange parse_seeds(const std::string& text) {
  const auto dots = text.find("..");
  try {
    if (dots == std::string::npos) {
      const auto s = std::stoull(text);
      return {s, s};
    }
    SeedRange r{std::stoull(text.substr(0, dots)), std::stoull(text.substr(dots + 2))};
    if (r.last < r.first) throw ConfigError("seed range " + text + " is empty");
    return r;
  } catch (const std::logic_error&) {
    throw ConfigError("bad seed range '" + text + "', expected A..B");
  }
}

// The bridge wins when an endpoint is given on the command line or in
// PATVCM_BRIDGE; otherwise the in-process toy models answer.
std::unique_ptr<TaskModel> make_model(const std::string& bridge) {
  std::optional<Endpoint> ep;
  if (!bridge.empty()) {
    try {
      ep = parse_endpoint(bridge);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  } else {
    ep = endpoint_from_env();
  }
  if (ep) return std::make_unique<BridgeClient>(*ep);
  return std::make_unique<ToyTaskModel>();
}

std::vector<PipelineConfig> configs_from(const std::string& path, std::optional<int> profile) {
  auto cfgs = load_configs(path);
  if (cfgs.empty()) throw ConfigError(path + ": no systems defined");
  if (profile) {
    for (auto& c : cfgs) c.profile = *profile;
  }
  return cfgs;
}

std::vector<ClipInput> load_corpus(const fs::path& root, std::size_t& skipped) {
  std::vector<ClipInput> corpus;
  for (const auto& dir : read_corpus_index(root)) {
    VideoClip clip = read_clip(dir / "manifest.txt");
    auto gt = read_truth(dir, clip.num_frames(), clip.height(), clip.width());
    if (!gt) {
      std::cerr << "warning: " << dir.string() << " has no ground truth, skipped\n";
      ++skipped;
      continue;
    }
    corpus.push_back({std::move(clip), std::move(*gt)});
  }
  return corpus;
}

void write_report(const std::string& path, const std::vector<ReportRow>& rows) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  write_csv(os, rows);
}

int run_synth(const std::string& seeds, const std::string& out, double distractors, bool helpful) {
  const auto range = parse_seeds(seeds);
  SceneParams params;
  params.distractor_probability = distractors;
  params.captions_helpful_on_distractors_only = helpful;
  std::vector<std::string> dirs;
  for (auto seed = range.first; seed <= range.last; ++seed) {
    const auto sample = generate_scene(seed, params);
    const std::string name = "clip_" + std::to_string(seed);
    write_clip(fs::path(out) / name, sample.clip);
    write_truth(fs::path(out) / name, sample.truth);
    dirs.push_back(name);
  }
  write_corpus_index(out, dirs);
  std::cout << "wrote " << dirs.size() << " clips to " << out << "\n";
  return 0;
}

int run_encode(const std::string& in, const std::string& config, const std::string& system,
               const std::string& out, std::optional<int> profile, const TaskModel& model) {
  const auto cfgs = configs_from(config, profile);
  const PipelineConfig* cfg = &cfgs.front();
  if (!system.empty()) {
    cfg = nullptr;
    for (const auto& c : cfgs) {
      if (c.label == system) cfg = &c;
    }
    if (!cfg) throw ConfigError(config + ": no system '" + system + "'");
  }
  validate_config(*cfg, model.capabilities());

  const fs::path manifest(in);
  const VideoClip clip = read_clip(manifest);
  const auto gt = read_truth(manifest.parent_path(), clip.num_frames(), clip.height(), clip.width());
  std::unique_ptr<EncoderOracle> oracle;
  if (gt) {
    oracle = std::make_unique<GroundTruthOracle>(*gt);
  } else {
    oracle = std::make_unique<ModelOracle>(model);
  }

  const auto result = pipeline_encode(clip, *cfg, model, *oracle);
  write_file(out, mux(result.stream));
  const auto bpp = bits_per_pixel(result.stream.total_bits(), static_cast<std::uint64_t>(clip.num_frames()),
                                  static_cast<std::uint64_t>(clip.height()), static_cast<std::uint64_t>(clip.width()));
  std::cout << cfg->label << ": " << result.stream.total_bits() << " bits, bpp " << bpp.to_string() << ", "
            << result.stage2.total() << " stage-2 ROIs\n";
  return 0;
}

void write_rois(const fs::path& path, const DecodeResult& dec, const TaskModel& model) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  const auto refs = flatten(dec.stage2);
  const auto& seg_frames = dec.segmentation_frames();
  for (std::size_t k = 0; k < refs.size(); ++k) {
    const auto& [f, roi] = refs[k];
    const Box& b = roi.box;
    os << "roi " << k << " frame " << f << " box " << b.x0 << ' ' << b.y0 << ' ' << b.w << ' ' << b.h;
    if (k < dec.prompts.size() && dec.prompts[k]) {
      os << " prompt " << dec.prompts[k]->index;
      if (dec.prompts[k]->bg_index) os << '/' << *dec.prompts[k]->bg_index;
    }
    if (k < dec.classes.size() && dec.classes[k]) {
      os << " class " << *dec.classes[k] << ' ' << class_names()[static_cast<std::size_t>(*dec.classes[k])];
    }
    if (k < dec.skeletons.size() && dec.skeletons[k]) os << " skeleton";
    if (k < dec.texts.size() && dec.texts[k]) os << " text \"" << *dec.texts[k] << '"';
    os << '\n';

    const auto& prompt = k < dec.prompts.size() ? dec.prompts[k] : std::nullopt;
    const auto& text = k < dec.texts.size() ? dec.texts[k] : std::nullopt;
    if (model.capabilities() & kCapSegment) {
      std::ostringstream name;
      name << "mask_" << std::setw(3) << std::setfill('0') << k << ".pgm";
      write_pgm(path.parent_path() / name.str(),
                segment_roi(model, seg_frames.frames[static_cast<std::size_t>(f)], roi, prompt, text));
    }
  }
}

int run_decode(const std::string& in, const std::string& out, const TaskModel& model) {
  const auto bytes = read_file(in);
  const auto dec = pipeline_decode(bytes, model);
  for (const auto& w : dec.warnings) std::cerr << "warning: " << w << "\n";
  const fs::path dir(out);
  write_clip(dir / "recon", dec.recon0);
  if (dec.has_det) write_clip(dir / "det_refined", dec.det_refined);
  if (dec.seg_refined) write_clip(dir / "seg_refined", *dec.seg_refined);
  if (dec.depth_refined) write_clip(dir / "depth_refined", *dec.depth_refined);
  write_rois(dir / "rois.txt", dec, model);
  std::cout << "decoded " << dec.recon0.num_frames() << " frames, " << dec.stage2.total() << " stage-2 ROIs to "
            << out << "\n";
  return 0;
}

int run_inspect(const std::string& in) {
  const auto bytes = read_file(in);
  const Bitstream s = demux(bytes);
  const auto& h = s.header;
  std::cout << "file        " << in << " (" << bytes.size() << " bytes)\n"
            << "version     " << int{h.version} << "\n"
            << "frames      " << h.frames << "\n"
            << "size        " << h.width << "x" << h.height << "\n"
            << "profile     " << int{h.baseline_profile_id} << "\n"
            << "streams     " << int{h.stream_count} << "\n"
            << "baseline    " << s.baseline_bits() << " bits\n";
  for (std::size_t i = 0; i < s.records.size(); ++i) {
    const auto& r = s.records[i];
    std::cout << "record " << i << "    " << aux_type_name(r.type_tag) << " task " << int{r.task_id} << ": "
              << r.payload_bits() << " bits" << (r.known() ? "" : " (unknown tag, opaque)") << "\n";
  }
  const auto bpp = bits_per_pixel(s.total_bits(), h.frames, h.height, h.width);
  std::cout << "total       " << s.total_bits() << " bits\n"
            << "bpp         " << bpp.to_string() << "\n"
            << "note        header and framing bytes are not counted in bpp\n";
  return 0;
}

int run_eval(const std::string& corpus_dir, const std::string& config, const std::string& report,
             std::optional<int> profile, const TaskModel& model) {
  Campaign c;
  c.systems = configs_from(config, profile);
  for (const auto& s : c.systems) validate_config(s, model.capabilities());
  const auto corpus = load_corpus(corpus_dir, c.skipped);
  for (const auto& clip : corpus) c.per_clip.push_back(evaluate_clip(clip, c.systems, model));
  write_report(report, report_rows(c));
  std::cout << "evaluated " << corpus.size() << " clips (" << c.skipped << " skipped) x " << c.systems.size()
            << " systems -> " << report << "\n";
  return 0;
}

// Baseline-only systems in the profiles file define the sweep ladder; any
// system with auxiliary streams is reported as an operating point.
int run_sweep(const std::string& corpus_dir, const std::string& profiles_file, const std::string& report,
              const TaskModel& model) {
  const auto cfgs = configs_from(profiles_file, std::nullopt);
  std::vector<int> profiles;
  std::vector<PipelineConfig> points;
  for (const auto& c : cfgs) {
    validate_config(c, model.capabilities());
    if (c.det || c.stage2()) {
      points.push_back(c);
    } else {
      profiles.push_back(c.profile);
    }
  }
  if (profiles.size() < 2) throw ConfigError(profiles_file + ": a sweep needs at least two baseline profiles");
  std::size_t skipped = 0;
  const auto corpus = load_corpus(corpus_dir, skipped);
  write_report(report, rate_sweep(corpus, profiles, model, points));
  std::cout << "swept " << profiles.size() << " profiles over " << corpus.size() << " clips -> " << report << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"patvcm: layered task-aware video token coding"};
  app.require_subcommand(1);

  std::string bridge;
  std::optional<int> profile;
  app.add_option("--bridge", bridge, "Remote task models at host:port (default: PATVCM_BRIDGE)");
  app.add_option("--profile", profile, "Baseline profile id, overriding config files");

  std::string seeds, out, in, config, system, corpus, report, profiles;
  double distractors = SceneParams{}.distractor_probability;
  bool helpful = false;

  auto* synth = app.add_subcommand("synth", "Generate a seeded synthetic corpus with ground truth");
  synth->add_option("--seeds", seeds, "Seed range A..B")->required();
  synth->add_option("--out", out, "Corpus directory")->required();
  synth->add_option("--distractors", distractors, "Probability of a distractor inside each object");
  synth->add_flag("--helpful-captions", helpful, "Captions name the true class only on objects with a distractor");

  auto* encode = app.add_subcommand("encode", "Encode one clip to a .patv file");
  encode->add_option("--in", in, "Clip manifest")->required();
  encode->add_option("--config", config, "System config file")->required();
  encode->add_option("--system", system, "System label (default: first in file)");
  encode->add_option("--out", out, "Output .patv")->required();

  auto* decode = app.add_subcommand("decode", "Decode a .patv file");
  decode->add_option("--in", in, "Input .patv")->required();
  decode->add_option("--out", out, "Output directory")->required();

  auto* inspect = app.add_subcommand("inspect", "Print header, per-record bits and bpp");
  inspect->add_option("file", in, "Input .patv")->required();

  auto* eval = app.add_subcommand("eval", "Evaluate systems on a corpus");
  eval->add_option("--corpus", corpus, "Corpus directory")->required();
  eval->add_option("--configs", config, "System config file")->required();
  eval->add_option("--report", report, "CSV report")->required();

  auto* sweep = app.add_subcommand("sweep", "Rate sweep across baseline profiles");
  sweep->add_option("--corpus", corpus, "Corpus directory")->required();
  sweep->add_option("--profiles", profiles, "Profiles file")->required();
  sweep->add_option("--report", report, "CSV report")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) return run_synth(seeds, out, distractors, helpful);
    if (*inspect) return run_inspect(in);
    const auto model = make_model(bridge);
    if (*encode) return run_encode(in, config, system, out, profile, *model);
    if (*decode) return run_decode(in, out, *model);
    if (*eval) return run_eval(corpus, config, report, profile, *model);
    if (*sweep) return run_sweep(corpus, profiles, report, *model);
  } catch (const StructuralError& e) {
    std::cerr << "structural error: " << e.what() << "\n";
    return kExitStructural;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
