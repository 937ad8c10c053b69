#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tworld/denoiser.hpp"
#include "tworld/prompts.hpp"
#include "tworld/sampler.hpp"

namespace tworld {

inline constexpr const char* kEngineVersion = "tworld 0.1.0";

/// Every knob of a generate run with defaults materialized.
struct GenerateSettings {
  Coord dims = Coord(32, 32, 16);
  int channels = 4;
  int tile = 16;
  int stride = 0;  // resolved to tile / 2 by resolve()
  int steps = 25;
  double cfg = 7.5;
  std::uint64_t seed = 0;
  std::string denoiser = "point:mu=0";
  std::string mask = "cosine";
  int threads = 1;
  PromptGrid prompts = uniform_prompt("scene");

  bool two_stage = false;
  std::string denoiser2 = "point:mu=0";
  int channels2 = 8;
  std::string structure_decoder = "affine";
  std::string decoder = "rgb";

  /// Fills derived defaults (stride) and validates.
  void resolve();
  RunConfig run_config() const;
};

MaskKind parse_mask_kind(const std::string& name);
std::string mask_kind_name(MaskKind kind);

nlohmann::json to_json(const GenerateSettings& settings);
GenerateSettings settings_from_json(const nlohmann::json& j);

nlohmann::json to_json(const PromptGrid& grid);
PromptGrid prompt_grid_from_json(const nlohmann::json& j);

/// Reproducibility record written next to every generated world.
struct RunManifest {
  GenerateSettings settings;
  std::string engine = kEngineVersion;
  std::string denoiser_name;
  DenoiserCapabilities capabilities;
  std::vector<StepRecord> steps;
  std::uint64_t denoiser_calls = 0;
  std::string output;
};

nlohmann::json to_json(const RunManifest& manifest);
RunManifest manifest_from_json(const nlohmann::json& j);

void save_manifest(const std::string& path, const RunManifest& manifest);
RunManifest load_manifest(const std::string& path);

}  // namespace tworld
