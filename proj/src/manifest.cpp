#include "tworld/manifest.hpp"

#include <fstream>

namespace tworld {

MaskKind parse_mask_kind(const std::string& name) {
  if (name == "cosine") return MaskKind::Cosine;
  if (name == "box") return MaskKind::Box;
  throw ParseError("unknown mask \"" + name + "\" (expected cosine or box)");
}

std::string mask_kind_name(MaskKind kind) { return kind == MaskKind::Cosine ? "cosine" : "box"; }

void GenerateSettings::resolve() {
  if ((dims <= 0).any()) throw ShapeError("dims must be positive");
  if (channels < 1) throw ShapeError("channels must be >= 1");
  if (tile < 1) throw ShapeError("tile size must be >= 1");
  if (stride <= 0) stride = std::max(1, tile / 2);
  if (stride > tile) throw ShapeError("stride must not exceed the tile size");
  if (steps < 1) throw ShapeError("steps must be >= 1");
  if (threads < 1) threads = 1;
  parse_mask_kind(mask);
  for (int a = 0; a < 3; ++a)
    if (tile > dims[a]) throw ShapeError("world smaller than tile on axis " + std::to_string(a));
}

RunConfig GenerateSettings::run_config() const {
  RunConfig c;
  c.dims = dims;
  c.channels = channels;
  c.tile_size = tile;
  c.stride = stride;
  c.seed = seed;
  c.schedule = Schedule::uniform(steps);
  c.guidance.scale = cfg;
  c.prompts = prompts;
  c.mask = parse_mask_kind(mask);
  c.threads = threads;
  return c;
}

nlohmann::json to_json(const PromptGrid& grid) {
  return {{"cells", {grid.cells.x(), grid.cells.y(), grid.cells.z()}}, {"cell_size", grid.cell_size}, {"prompts", grid.prompts}};
}

PromptGrid prompt_grid_from_json(const nlohmann::json& j) {
  PromptGrid grid;
  const auto cells = j.at("cells").get<std::vector<int>>();
  if (cells.size() != 3) throw ParseError("prompt grid cells must have three entries");
  grid.cells = Coord(cells[0], cells[1], cells[2]);
  grid.cell_size = j.value("cell_size", 0);
  grid.prompts = j.at("prompts").get<std::vector<std::string>>();
  if (std::int64_t(grid.prompts.size()) != voxel_count(grid.cells)) throw ParseError("prompt grid size mismatch");
  return grid;
}

nlohmann::json to_json(const GenerateSettings& s) {
  return {{"dims", {s.dims.x(), s.dims.y(), s.dims.z()}},
          {"channels", s.channels},
          {"tile", s.tile},
          {"stride", s.stride},
          {"steps", s.steps},
          {"cfg", s.cfg},
          {"seed", s.seed},
          {"denoiser", s.denoiser},
          {"mask", s.mask},
          {"threads", s.threads},
          {"prompts", to_json(s.prompts)},
          {"two_stage", s.two_stage},
          {"denoiser2", s.denoiser2},
          {"channels2", s.channels2},
          {"structure_decoder", s.structure_decoder},
          {"decoder", s.decoder}};
}

GenerateSettings settings_from_json(const nlohmann::json& j) {
  GenerateSettings s;
  try {
    const auto dims = j.at("dims").get<std::vector<int>>();
    if (dims.size() != 3) throw ParseError("manifest dims must have three entries");
    s.dims = Coord(dims[0], dims[1], dims[2]);
    s.channels = j.at("channels").get<int>();
    s.tile = j.at("tile").get<int>();
    s.stride = j.at("stride").get<int>();
    s.steps = j.at("steps").get<int>();
    s.cfg = j.at("cfg").get<double>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.denoiser = j.at("denoiser").get<std::string>();
    s.mask = j.at("mask").get<std::string>();
    s.threads = j.at("threads").get<int>();
    s.prompts = prompt_grid_from_json(j.at("prompts"));
    s.two_stage = j.at("two_stage").get<bool>();
    s.denoiser2 = j.at("denoiser2").get<std::string>();
    s.channels2 = j.at("channels2").get<int>();
    s.structure_decoder = j.at("structure_decoder").get<std::string>();
    s.decoder = j.at("decoder").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed run settings: ") + e.what());
  }
  return s;
}

nlohmann::json to_json(const RunManifest& m) {
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& r : m.steps)
    steps.push_back({{"index", r.index}, {"t", r.t}, {"dt", r.dt}, {"tiles", r.tiles}, {"seconds", r.seconds}, {"calls", r.calls}});
  return {{"engine", m.engine},
          {"settings", to_json(m.settings)},
          {"denoiser",
           {{"name", m.denoiser_name},
            {"capabilities",
             {{"arbitrary_size", m.capabilities.arbitrary_size},
              {"max_size", m.capabilities.max_size},
              {"channels", m.capabilities.channels},
              {"pointwise", m.capabilities.pointwise},
              {"deterministic", m.capabilities.deterministic}}}}},
          {"steps", steps},
          {"denoiser_calls", m.denoiser_calls},
          {"output", m.output}};
}

RunManifest manifest_from_json(const nlohmann::json& j) {
  RunManifest m;
  try {
    m.engine = j.at("engine").get<std::string>();
    m.settings = settings_from_json(j.at("settings"));
    m.denoiser_name = j.at("denoiser").at("name").get<std::string>();
    const auto& caps = j.at("denoiser").at("capabilities");
    m.capabilities = {caps.at("arbitrary_size").get<bool>(), caps.at("max_size").get<int>(), caps.at("channels").get<int>(),
                      caps.at("pointwise").get<bool>(), caps.at("deterministic").get<bool>()};
    for (const auto& r : j.at("steps"))
      m.steps.push_back({r.at("index").get<int>(), r.at("t").get<double>(), r.at("dt").get<double>(),
                         r.at("tiles").get<std::size_t>(), r.at("seconds").get<double>(), r.at("calls").get<std::uint64_t>()});
    m.denoiser_calls = j.at("denoiser_calls").get<std::uint64_t>();
    m.output = j.value("output", std::string());
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed manifest: ") + e.what());
  }
  return m;
}

void save_manifest(const std::string& path, const RunManifest& manifest) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open " + path + " for writing");
  out << to_json(manifest).dump(2) << "\n";
}

RunManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open manifest " + path);
  try {
    return manifest_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("malformed manifest " + path + ": " + e.what());
  }
}

}  // namespace tworld
