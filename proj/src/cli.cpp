#include "tworld/cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

#include "tworld/analytic.hpp"
#include "tworld/blend.hpp"
#include "tworld/container.hpp"
#include "tworld/inpaint.hpp"
#include "tworld/manifest.hpp"
#include "tworld/oracle.hpp"
#include "tworld/pipeline.hpp"
#include "tworld/specs.hpp"
#include "tworld/tiling.hpp"

namespace tworld {

namespace {

class UsageError : public Error {
 public:
  using Error::Error;
};

Coord parse_triple(const std::string& text, const char* what) {
  std::istringstream ss(text);
  std::string item;
  std::vector<int> v;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stoi(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError(std::string("invalid ") + what + " \"" + text + "\" (expected X,Y,Z)");
    }
  }
  if (v.size() != 3) throw UsageError(std::string("invalid ") + what + " \"" + text + "\" (expected X,Y,Z)");
  return Coord(v[0], v[1], v[2]);
}

std::string format_triple(const Coord& c) {
  return std::to_string(c.x()) + "," + std::to_string(c.y()) + "," + std::to_string(c.z());
}

/// Flag values shared by generate, expand and bench.
struct RunFlags {
  std::string dims = "32,32,16";
  int channels = 4;
  int tile = 16;
  int stride = 0;
  int steps = 25;
  double cfg = 7.5;
  std::uint64_t seed = 0;
  std::string prompts_file;
  std::string prompt;
  std::string denoiser = "point:mu=0";
  std::string mask = "cosine";
  int threads = default_thread_count();
  bool quiet = false;
  std::string config;

  void add_to(CLI::App& app, bool with_dims = true) {
    if (with_dims) app.add_option("--dims", dims, "world extent X,Y,Z")->capture_default_str();
    app.add_option("--channels", channels, "channels per voxel")->capture_default_str();
    app.add_option("--tile", tile, "tile size S")->capture_default_str();
    app.add_option("--stride", stride, "tile stride s (default S/2)");
    app.add_option("--steps", steps, "Euler steps")->capture_default_str();
    app.add_option("--cfg", cfg, "classifier-free guidance scale")->capture_default_str();
    app.add_option("--seed", seed, "noise seed")->capture_default_str();
    app.add_option("--prompts", prompts_file, "prompt grid file");
    app.add_option("--prompt", prompt, "single prompt for every tile");
    app.add_option("--denoiser", denoiser, "denoiser spec")->capture_default_str();
    app.add_option("--blend", mask, "blend mask: cosine or box")->capture_default_str();
    app.add_option("--threads", threads, "worker threads (default from TWORLD_THREADS)")->capture_default_str();
    app.add_flag("--quiet", quiet, "suppress per-step progress");
    app.add_option("--config", config, "key=value config file (flags win)");
  }

  GenerateSettings settings() const {
    GenerateSettings s;
    s.dims = parse_triple(dims, "--dims");
    s.channels = channels;
    s.tile = tile;
    s.stride = stride;
    s.steps = steps;
    s.cfg = cfg;
    s.seed = seed;
    s.denoiser = denoiser;
    s.mask = mask;
    s.threads = threads;
    if (!prompts_file.empty() && !prompt.empty()) throw UsageError("--prompts and --prompt are mutually exclusive");
    if (!prompts_file.empty()) {
      std::ifstream probe(prompts_file);
      if (!probe) throw UsageError("prompt grid file not found: " + prompts_file);
      s.prompts = load_prompt_grid(prompts_file);
    } else if (!prompt.empty()) {
      s.prompts = uniform_prompt(prompt);
    }
    try {
      parse_mask_kind(mask);
      s.resolve();
    } catch (const Error& e) {
      throw UsageError(e.what());
    }
    return s;
  }
};

ProgressFn progress_printer(std::ostream& err, bool quiet) {
  if (quiet) return {};
  return [&err](const StepRecord& r) {
    err << "step " << r.index << " t=" << std::setprecision(6) << r.t << " tiles=" << r.tiles << " calls=" << r.calls
        << " time=" << std::fixed << std::setprecision(3) << r.seconds << "s" << std::defaultfloat << "\n";
  };
}

void check_prompt_extent(const GenerateSettings& s) {
  if ((s.prompts.cells == 1).all()) return;
  const int cell = s.prompts.cell_size > 0 ? s.prompts.cell_size : s.tile;
  const Coord extent = s.prompts.cells * cell;
  if ((extent < s.dims).any())
    throw UsageError("prompt grid of " + to_string(s.prompts.cells) + " cells x " + std::to_string(cell) +
                     " voxels does not cover world " + to_string(s.dims));
}

struct GenerateOutput {
  DenseWorld world;
  RunManifest manifest;
  std::vector<Point> points;
  bool have_points = false;
};

GenerateOutput execute_generate(const GenerateSettings& s, std::ostream& err, bool quiet, double ply_threshold) {
  GenerateOutput out;
  out.manifest.settings = s;
  const auto denoiser = make_denoiser(s.denoiser);
  out.manifest.denoiser_name = denoiser->name();
  out.manifest.capabilities = denoiser->capabilities();
  const auto progress = progress_printer(err, quiet);
  if (!s.two_stage) {
    auto result = run_diffusion(s.run_config(), *denoiser, progress);
    out.world = std::move(result.world);
    out.manifest.steps = std::move(result.steps);
    out.manifest.denoiser_calls = result.denoiser_calls;
    if (out.world.channels() >= 3) {
      out.points = collect_points(out.world, ply_threshold, s.tile);
      out.have_points = true;
    }
    return out;
  }
  const auto denoiser2 = make_denoiser(s.denoiser2);
  const auto structure = make_structure_decoder(s.structure_decoder, s.channels);
  const auto decoder = make_decoder(s.decoder, s.channels2);
  TwoStageConfig config;
  config.stage1 = s.run_config();
  config.stage2_channels = s.channels2;
  auto result = run_two_stage(config, *denoiser, *structure, *denoiser2, *decoder, progress);
  for (const auto& w : result.warnings) err << "warning: " << w << "\n";
  out.world = std::move(result.decoded);
  out.manifest.steps = std::move(result.steps);
  out.manifest.denoiser_calls = result.denoiser_calls;
  if (out.world.channels() >= 3) {
    out.points = collect_points(out.world, ply_threshold, s.tile * structure->scale(), &result.occupied);
    out.have_points = true;
  }
  return out;
}

int cmd_generate(RunFlags& flags, const std::string& out_path, std::string manifest_out, const std::string& replay,
                 bool two_stage, const std::string& denoiser2, int channels2, const std::string& structure,
                 const std::string& decoder, const std::string& ply, double ply_threshold, CLI::App& app,
                 std::ostream& out, std::ostream& err) {
  GenerateSettings s;
  if (!replay.empty()) {
    s = load_manifest(replay).settings;
    if (app.count("--threads")) s.threads = flags.threads;
  } else {
    s = flags.settings();
    s.two_stage = two_stage;
    s.denoiser2 = denoiser2;
    s.channels2 = channels2;
    s.structure_decoder = structure;
    s.decoder = decoder;
    check_prompt_extent(s);
    if (s.two_stage) {
      // Fail on malformed specs before any compute.
      try {
        make_structure_decoder(s.structure_decoder, s.channels);
        make_decoder(s.decoder, s.channels2);
      } catch (const Error& e) {
        throw UsageError(e.what());
      }
    }
  }
  if (ply.size() && !s.two_stage && s.channels < 3) throw UsageError("--ply needs at least three channels");

  auto result = execute_generate(s, err, flags.quiet, ply_threshold);
  save_world(out_path, result.world);
  if (manifest_out.empty()) manifest_out = out_path + ".manifest.json";
  result.manifest.output = out_path;
  save_manifest(manifest_out, result.manifest);
  if (!ply.empty() && result.have_points) save_pointcloud(ply, result.points);
  out << "wrote " << out_path << " (" << format_triple(result.world.dims()) << " x " << result.world.channels()
      << "), manifest " << manifest_out << ", denoiser calls " << result.manifest.denoiser_calls << "\n";
  return kExitOk;
}

int cmd_expand(RunFlags& flags, const std::string& world_path, const std::string& mask_path, const std::string& place,
               double sigma, int resample, const std::string& out_path, CLI::App& app, std::ostream& out,
               std::ostream& err) {
  const DenseWorld input = load_dense_world(world_path);
  GenerateSettings s;
  if (!app.count("--dims")) flags.dims = format_triple(input.dims());
  if (!app.count("--channels")) flags.channels = input.channels();
  s = flags.settings();
  check_prompt_extent(s);
  const Coord offset = parse_triple(place, "--place");
  if (input.channels() != s.channels)
    throw ShapeError("input world has " + std::to_string(input.channels()) + " channels, run expects " +
                     std::to_string(s.channels));

  DenseWorld truth(s.dims, s.channels);
  DenseWorld mask(s.dims, 1);
  write_box(truth, offset, input);
  if (!mask_path.empty()) {
    const DenseWorld given = load_dense_world(mask_path);
    if ((given.dims() != input.dims()).any() || given.channels() != 1)
      throw ShapeError("mask dims " + to_string(given.dims()) + " x " + std::to_string(given.channels()) +
                       " do not match world dims " + to_string(input.dims()) + " x 1");
    write_box(mask, offset, given);
  } else {
    write_box(mask, offset, DenseWorld(input.dims(), 1, 1.0f));
  }

  const auto denoiser = make_denoiser(s.denoiser);
  RepaintOptions options{sigma, resample, Coord::Zero()};
  auto result = repaint_run(s.run_config(), truth, mask, options, *denoiser, progress_printer(err, flags.quiet));
  save_world(out_path, result.world);
  RunManifest manifest;
  manifest.settings = s;
  manifest.denoiser_name = denoiser->name();
  manifest.capabilities = denoiser->capabilities();
  manifest.steps = result.steps;
  manifest.denoiser_calls = result.denoiser_calls;
  manifest.output = out_path;
  save_manifest(out_path + ".manifest.json", manifest);
  out << "wrote " << out_path << " (" << format_triple(result.world.dims()) << " x " << result.world.channels() << ")\n";
  return kExitOk;
}

int cmd_decode(const std::string& world_path, const std::string& spec, int tile, const std::string& out_path,
               const std::string& ply, double ply_threshold, int threads, std::ostream& out) {
  const DenseWorld world = load_dense_world(world_path);
  const auto decoder = make_decoder(spec, world.channels());
  const DenseWorld decoded = decode_tiled(world, *decoder, tile, threads);
  save_world(out_path, decoded);
  if (!ply.empty()) save_pointcloud(ply, collect_points(decoded, ply_threshold, tile));
  out << "decoded " << world_path << " with " << decoder->name() << " into " << out_path << "\n";
  return kExitOk;
}

int cmd_validate(const std::string& dims_text, int tile, int stride, bool decode, std::ostream& out) {
  const Coord dims = parse_triple(dims_text, "--dims");
  TileLayout layout;
  try {
    layout = decode ? decode_layout(dims, tile) : plan_tiles(dims, tile, stride > 0 ? stride : std::max(1, tile / 2));
  } catch (const ShapeError& e) {
    throw UsageError(e.what());
  }
  const auto report = coverage_check(layout);
  out << "dims=" << format_triple(dims) << " tile=" << layout.tile_size << " stride=" << layout.stride
      << " tiles=" << layout.size() << "\n";
  out << "index  origin\n";
  for (std::size_t i = 0; i < layout.size(); ++i)
    out << std::setw(5) << i << "  " << format_triple(layout.origins[i]) << "\n";
  out << "cover_min=" << report.min_count << " cover_max=" << report.max_count << "\n";
  for (std::size_t k = 0; k < report.histogram.size(); ++k)
    if (report.histogram[k]) out << "cover[" << k << "]=" << report.histogram[k] << "\n";
  out << (report.ok() ? "layout ok\n" : "layout has uncovered voxels\n");
  return report.ok() ? kExitOk : kExitRuntime;
}

/// The seam fixture: border-pathology denoiser on a world two tiles wide.
int cmd_ablate(const std::string& blends, int tile, std::uint64_t seed, int steps, bool baseline, int threads,
               std::ostream& out) {
  std::vector<std::string> kinds;
  std::istringstream ss(blends);
  for (std::string k; std::getline(ss, k, ',');) kinds.push_back(k);
  const PatternDenoiser pathology(Pattern{Pattern::Kind::Border, 0.0, 1.0});
  RunConfig config;
  config.dims = Coord(2 * tile, tile, tile);
  config.channels = 1;
  config.tile_size = tile;
  config.seed = seed;
  config.schedule = Schedule::uniform(steps);
  config.threads = threads;
  const TileLayout layout = plan_tiles(config.dims, tile, config.resolved_stride());

  std::map<std::string, double> seam;
  for (const auto& k : kinds) {
    config.mask = parse_mask_kind(k);
    const auto result = run_diffusion(config, pathology);
    const auto report = seam_discontinuity(result.world, layout);
    seam[k] = report.max;
    out << "mask=" << k << " seam_max=" << std::setprecision(9) << report.max << " seam_mean=" << report.mean
        << " calls=" << result.denoiser_calls << "\n";
  }
  if (baseline) {
    config.mask = MaskKind::Cosine;
    const auto result = autoregressive_baseline(config, pathology);
    const auto report = seam_discontinuity(result.world, layout);
    out << "mask=autoregressive seam_max=" << std::setprecision(9) << report.max << " seam_mean=" << report.mean
        << " calls=" << result.denoiser_calls << "\n";
  }
  if (seam.count("cosine") && seam.count("box")) {
    const bool pass = seam["cosine"] < seam["box"];
    out << "ratio=" << seam["cosine"] / seam["box"] << " cosine_lt_box=" << (pass ? "true" : "false") << "\n";
    return pass ? kExitOk : kExitRuntime;
  }
  return kExitOk;
}

int cmd_bench(RunFlags& flags, const std::string& thread_list, std::ostream& out) {
  GenerateSettings s = flags.settings();
  std::istringstream ss(thread_list);
  std::optional<DenseWorld> first;
  bool identical = true;
  for (std::string item; std::getline(ss, item, ',');) {
    s.threads = std::stoi(item);
    const auto denoiser = make_denoiser(s.denoiser);
    const TileLayout layout = plan_tiles(s.dims, s.tile, s.stride);
    const auto start = std::chrono::steady_clock::now();
    const auto result = run_diffusion(s.run_config(), *denoiser);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!first) first = result.world;
    identical = identical && *first == result.world;
    out << "threads=" << s.threads << " tiles=" << layout.size() << " steps=" << s.steps
        << " calls=" << result.denoiser_calls << " seconds=" << seconds << "\n";
  }
  out << "bitwise_identical=" << (identical ? "true" : "false") << "\n";
  return identical ? kExitOk : kExitRuntime;
}

}  // namespace

std::vector<std::string> merge_config_file(const std::vector<std::string>& args, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file " + path);
  std::set<std::string> given;
  for (const auto& a : args)
    if (a.rfind("--", 0) == 0) given.insert(a.substr(2, a.find('=') == std::string::npos ? std::string::npos : a.find('=') - 2));
  std::vector<std::string> merged = args;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw UsageError(path + ":" + std::to_string(lineno) + ": expected key=value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.rfind("--", 0) == 0) key.erase(0, 2);
    if (key == "config" || given.count(key)) continue;
    if (value == "true" || value == "false") {
      if (value == "true") merged.push_back("--" + key);
      continue;
    }
    merged.push_back("--" + key);
    merged.push_back(value);
  }
  return merged;
}

int run_cli(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args = raw_args;
  // --config is expanded before parsing so that explicit flags take precedence.
  for (std::size_t i = 0; i + 1 < args.size(); ++i) {
    if (args[i] == "--config") {
      try {
        args = merge_config_file(args, args[i + 1]);
      } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
      }
      break;
    }
  }

  CLI::App app{"Tiled flow-matching world generator"};
  app.require_subcommand(1);

  RunFlags gen_flags;
  std::string gen_out, gen_manifest_out, gen_replay, gen_denoiser2 = "point:mu=0", gen_structure = "affine",
                                                     gen_decoder = "rgb", gen_ply;
  bool gen_two_stage = false;
  int gen_channels2 = 8;
  double gen_ply_threshold = 0.0;
  auto* generate = app.add_subcommand("generate", "generate a world");
  gen_flags.add_to(*generate);
  generate->add_option("--out", gen_out, "output world container")->required();
  generate->add_option("--manifest-out", gen_manifest_out, "manifest path (default <out>.manifest.json)");
  generate->add_option("--manifest", gen_replay, "replay the settings of an existing manifest");
  generate->add_flag("--two-stage", gen_two_stage, "dense structure stage followed by a sparse latent stage");
  generate->add_option("--denoiser2", gen_denoiser2, "stage-2 denoiser spec")->capture_default_str();
  generate->add_option("--channels2", gen_channels2, "stage-2 latent channels")->capture_default_str();
  generate->add_option("--structure-decoder", gen_structure, "latent to occupancy decoder")->capture_default_str();
  generate->add_option("--decoder", gen_decoder, "stage-2 payload decoder")->capture_default_str();
  generate->add_option("--ply", gen_ply, "also write a point cloud");
  generate->add_option("--ply-threshold", gen_ply_threshold, "point emission threshold")->capture_default_str();

  RunFlags exp_flags;
  std::string exp_world, exp_mask, exp_place = "0,0,0", exp_out;
  double exp_sigma = 1.5;
  int exp_resample = 1;
  auto* expand = app.add_subcommand("expand", "extend or inpaint an existing world");
  exp_flags.add_to(*expand);
  expand->add_option("--world", exp_world, "known world container")->required();
  expand->add_option("--mask", exp_mask, "keep mask container (C=1, same dims as --world)");
  expand->add_option("--place", exp_place, "position of the known world inside --dims")->capture_default_str();
  expand->add_option("--sigma", exp_sigma, "mask blur in voxels")->capture_default_str();
  expand->add_option("--resample", exp_resample, "RePaint passes per step")->capture_default_str();
  expand->add_option("--out", exp_out, "output world container")->required();

  std::string dec_world, dec_spec = "identity", dec_out, dec_ply;
  int dec_tile = 16, dec_threads = default_thread_count();
  double dec_threshold = 0.0;
  auto* decode = app.add_subcommand("decode", "stride-S tiled decoding of a world");
  decode->add_option("--world", dec_world, "input world container")->required();
  decode->add_option("--decoder", dec_spec, "decoder spec")->capture_default_str();
  decode->add_option("--tile", dec_tile, "decode tile size")->capture_default_str();
  decode->add_option("--out", dec_out, "output world container")->required();
  decode->add_option("--ply", dec_ply, "also write a point cloud");
  decode->add_option("--ply-threshold", dec_threshold, "point emission threshold")->capture_default_str();
  decode->add_option("--threads", dec_threads, "worker threads")->capture_default_str();

  std::string val_dims = "32,32,16";
  int val_tile = 16, val_stride = 0;
  bool val_decode = false;
  auto* validate = app.add_subcommand("validate-layout", "print a tile layout and its cover counts");
  validate->alias("validate");
  validate->add_option("--dims", val_dims, "world extent X,Y,Z")->capture_default_str();
  validate->add_option("--tile", val_tile, "tile size")->capture_default_str();
  validate->add_option("--stride", val_stride, "stride (default S/2)");
  validate->add_flag("--decode", val_decode, "use the stride-S decode layout");

  std::string abl_blend = "cosine,box";
  int abl_tile = 16, abl_steps = 25, abl_threads = default_thread_count();
  std::uint64_t abl_seed = 0;
  bool abl_baseline = false;
  auto* ablate = app.add_subcommand("ablate", "seam comparison on the border-pathology fixture");
  ablate->add_option("--blend", abl_blend, "comma-separated masks")->capture_default_str();
  ablate->add_option("--tile", abl_tile, "tile size")->capture_default_str();
  ablate->add_option("--seed", abl_seed, "noise seed")->capture_default_str();
  ablate->add_option("--steps", abl_steps, "Euler steps")->capture_default_str();
  ablate->add_option("--threads", abl_threads, "worker threads")->capture_default_str();
  ablate->add_flag("--baseline", abl_baseline, "also run the autoregressive inpainting baseline");

  RunFlags bench_flags;
  bench_flags.dims = "24,24,24";
  bench_flags.tile = 8;
  bench_flags.quiet = true;
  std::string bench_threads = "1,8";
  auto* bench = app.add_subcommand("bench", "denoiser-call accounting and thread scaling");
  bench_flags.add_to(*bench);
  bench->add_option("--thread-list", bench_threads, "thread counts to compare")->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
      return kExitOk;
    }
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (*generate)
      return cmd_generate(gen_flags, gen_out, gen_manifest_out, gen_replay, gen_two_stage, gen_denoiser2, gen_channels2,
                          gen_structure, gen_decoder, gen_ply, gen_ply_threshold, *generate, out, err);
    if (*expand)
      return cmd_expand(exp_flags, exp_world, exp_mask, exp_place, exp_sigma, exp_resample, exp_out, *expand, out, err);
    if (*decode) return cmd_decode(dec_world, dec_spec, dec_tile, dec_out, dec_ply, dec_threshold, dec_threads, out);
    if (*validate) return cmd_validate(val_dims, val_tile, val_stride, val_decode, out);
    if (*ablate) return cmd_ablate(abl_blend, abl_tile, abl_seed, abl_steps, abl_baseline, abl_threads, out);
    if (*bench) return cmd_bench(bench_flags, bench_threads, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace tworld
