#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "n3map/eval.hpp"
#include "n3map/mapper.hpp"

namespace n3map {

struct SynthConfig {
  std::string scene = "sphere";  // sphere | ground_sphere | corridor, or a scene file path
  int frames = 20;
  int rays = 20000;
  double noise = 0.0;        // range noise sigma, metres
  double gt_spacing = 0.02;  // ground-truth cloud subsampling, metres
};

struct RunConfig {
  MapperConfig mapper;
  int feature_length = kFeatureDim;  // fixed at build time, checked on load
  int hidden_width = kHiddenWidth;
  int normal_k = 20;
  int frame_stride = 1;
  int max_frames = 0;  // 0 = all
  double mc_voxel = 0.0;     // 0 = leaf size
  double cull_radius = 0.0;  // 0 = 2 * leaf size
  EvalConfig eval;
  SynthConfig synth;
  std::string data_dir;
  std::string out_dir = "out";

  void validate() const;  // throws ConfigError
  [[nodiscard]] double effective_mc_voxel() const { return mc_voxel > 0 ? mc_voxel : mapper.map.leaf_size; }
  [[nodiscard]] double effective_cull_radius() const {
    return cull_radius > 0 ? cull_radius : 2.0 * mapper.map.leaf_size;
  }
};

// One configurable parameter: kebab-case name shared by config files and
// command-line flags.
struct ConfigField {
  std::string name;
  std::string section;
  std::string help;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;  // throws ConfigError
};

const std::vector<ConfigField>& config_fields();
const ConfigField* find_field(const std::string& name);

// Outdoor defaults or the indoor preset (v = 0.04 m, tr = 0.03 m).
RunConfig preset_config(const std::string& name);

// `key = value` lines, optional [section] headers, '#' comments. Keys may be
// written with '-' or '_'.
void apply_config_text(RunConfig& cfg, const std::string& text, const std::string& origin = "config");
void apply_config_file(RunConfig& cfg, const std::filesystem::path& path);
// Applies N3_SEED when set. Returns true if the seed was overridden.
bool apply_seed_env(RunConfig& cfg);

// Every effective parameter, grouped by section; parses back to the same config.
std::string config_to_text(const RunConfig& cfg);

}  // namespace n3map
