#include "n3map/config.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include "n3map/errors.hpp"

namespace n3map {

namespace {

std::string trim(const std::string& s) {
  const size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string format(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <typename T>
T parse_number(const std::string& name, const std::string& text) {
  T value{};
  std::istringstream ss(text);
  ss >> value;
  std::string rest;
  if (ss.fail() || (ss >> rest)) throw ConfigError("invalid value '" + text + "' for " + name);
  if constexpr (std::is_unsigned_v<T>) {
    if (text.find('-') != std::string::npos) throw ConfigError("negative value '" + text + "' for " + name);
  }
  return value;
}

bool parse_bool(const std::string& name, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  throw ConfigError("invalid boolean '" + text + "' for " + name);
}


template <typename T>
ConfigField number(std::string name, std::string section, std::string help, T& (*ref)(RunConfig&)) {
  ConfigField f{name, std::move(section), std::move(help), nullptr, nullptr};
  f.get = [ref](const RunConfig& c) {
    auto& v = ref(const_cast<RunConfig&>(c));
    if constexpr (std::is_floating_point_v<T>) return format(v);
    else return std::to_string(v);
  };
  f.set = [ref, name](RunConfig& c, const std::string& s) { ref(c) = parse_number<T>(name, s); };
  return f;
}

ConfigField boolean(std::string name, std::string section, std::string help, bool& (*ref)(RunConfig&)) {
  ConfigField f{name, std::move(section), std::move(help), nullptr, nullptr};
  f.get = [ref](const RunConfig& c) { return std::string(ref(const_cast<RunConfig&>(c)) ? "true" : "false"); };
  f.set = [ref, name](RunConfig& c, const std::string& s) { ref(c) = parse_bool(name, s); };
  return f;
}

ConfigField text(std::string name, std::string section, std::string help, std::string& (*ref)(RunConfig&)) {
  ConfigField f{name, std::move(section), std::move(help), nullptr, nullptr};
  f.get = [ref](const RunConfig& c) { return ref(const_cast<RunConfig&>(c)); };
  f.set = [ref](RunConfig& c, const std::string& s) { ref(c) = s; };
  return f;
}

std::vector<ConfigField> build_fields() {
  std::vector<ConfigField> f;
  // clang-format off
  f.push_back(number<double>("leaf-size", "map", "leaf voxel size v (m)", [](RunConfig& c) -> double& { return c.mapper.map.leaf_size; }));
  f.push_back(number<int>("levels", "map", "feature grid levels L", [](RunConfig& c) -> int& { return c.mapper.map.levels; }));
  f.push_back(number<int>("feature-length", "map", "feature vector length (fixed)", [](RunConfig& c) -> int& { return c.feature_length; }));
  f.push_back(number<int>("hidden-width", "map", "decoder hidden width (fixed, 2 layers)", [](RunConfig& c) -> int& { return c.hidden_width; }));
  f.push_back(number<double>("fd-step", "map", "finite-difference step (m), 0 = v/4", [](RunConfig& c) -> double& { return c.mapper.map.fd_step; }));

  {
    ConfigField s{"strategy", "sampling", "label strategy: normal_guided | projective | corrected", nullptr, nullptr};
    s.get = [](const RunConfig& c) { return std::string(to_string(c.mapper.sampler.strategy)); };
    s.set = [](RunConfig& c, const std::string& v) { c.mapper.sampler.strategy = parse_strategy(v); };
    f.push_back(std::move(s));
  }
  f.push_back(number<double>("sigma", "sampling", "near-surface sample scale (m)", [](RunConfig& c) -> double& { return c.mapper.sampler.sigma; }));
  f.push_back(number<double>("tr", "sampling", "truncation distance (m)", [](RunConfig& c) -> double& { return c.mapper.sampler.tr; }));
  f.push_back(number<int>("n-surface", "sampling", "near-surface samples per point", [](RunConfig& c) -> int& { return c.mapper.sampler.n_surface; }));
  f.push_back(number<int>("n-free", "sampling", "free-space samples per point", [](RunConfig& c) -> int& { return c.mapper.sampler.n_free; }));
  f.push_back(number<double>("free-min-distance", "sampling", "free-space samples start this far from the sensor (m)", [](RunConfig& c) -> double& { return c.mapper.sampler.free_min_distance; }));
  f.push_back(boolean("nn-sanity-check", "sampling", "reject normal-guided samples closer to another point", [](RunConfig& c) -> bool& { return c.mapper.sampler.nn_sanity_check; }));
  f.push_back(number<int>("knn", "sampling", "neighbours for normal estimation", [](RunConfig& c) -> int& { return c.normal_k; }));

  f.push_back(number<double>("beta", "loss", "sigmoid sharpness (m)", [](RunConfig& c) -> double& { return c.mapper.loss.beta; }));
  f.push_back(number<double>("lambda-e", "loss", "eikonal weight", [](RunConfig& c) -> double& { return c.mapper.loss.lambda_e; }));

  f.push_back(number<int>("iters", "training", "optimization steps per frame", [](RunConfig& c) -> int& { return c.mapper.train.iters; }));
  f.push_back(number<int>("n-voxels", "training", "voxels per batch N_v", [](RunConfig& c) -> int& { return c.mapper.train.hierarchical.n_voxels; }));
  f.push_back(number<int>("n-per-voxel", "training", "pairs per voxel N_p", [](RunConfig& c) -> int& { return c.mapper.train.hierarchical.n_per_voxel; }));
  f.push_back(number<int>("n-threshold", "training", "sparse-voxel threshold N_t", [](RunConfig& c) -> int& { return c.mapper.train.hierarchical.threshold; }));
  f.push_back(number<int>("freeze-after", "training", "freeze the decoder after this many frames (0 = never)", [](RunConfig& c) -> int& { return c.mapper.train.freeze_after; }));
  f.push_back(number<double>("learning-rate", "training", "optimizer learning rate", [](RunConfig& c) -> double& { return c.mapper.train.adam.learning_rate; }));
  f.push_back(number<double>("adam-beta1", "training", "first-moment decay", [](RunConfig& c) -> double& { return c.mapper.train.adam.beta1; }));
  f.push_back(number<double>("adam-beta2", "training", "second-moment decay", [](RunConfig& c) -> double& { return c.mapper.train.adam.beta2; }));
  f.push_back(number<double>("adam-epsilon", "training", "optimizer epsilon", [](RunConfig& c) -> double& { return c.mapper.train.adam.epsilon; }));
  f.push_back(number<double>("window-range", "training", "sliding window range r (m)", [](RunConfig& c) -> double& { return c.mapper.train.window_range; }));
  {
    ConfigField w{"window-mode", "training", "training memory: voxel | keyframe | replay", nullptr, nullptr};
    w.get = [](const RunConfig& c) { return std::string(to_string(c.mapper.train.window_mode)); };
    w.set = [](RunConfig& c, const std::string& v) { c.mapper.train.window_mode = parse_window_mode(v); };
    f.push_back(std::move(w));
  }
  f.push_back(number<int>("keyframes", "training", "frames kept by the keyframe window", [](RunConfig& c) -> int& { return c.mapper.train.keyframes; }));
  {
    ConfigField s{"sampling-mode", "training", "batch sampling: hierarchical | random", nullptr, nullptr};
    s.get = [](const RunConfig& c) { return std::string(to_string(c.mapper.train.sampling)); };
    s.set = [](RunConfig& c, const std::string& v) { c.mapper.train.sampling = parse_batch_sampling(v); };
    f.push_back(std::move(s));
  }
  f.push_back(number<size_t>("voxel-cap", "training", "pairs kept per voxel (0 = unbounded)", [](RunConfig& c) -> size_t& { return c.mapper.train.voxel_cap; }));

  f.push_back(number<double>("mc-voxel", "mesh", "marching cubes grid spacing (m), 0 = leaf size", [](RunConfig& c) -> double& { return c.mc_voxel; }));
  f.push_back(number<double>("cull-radius", "mesh", "cull triangles farther than this from observations (m), 0 = 2v", [](RunConfig& c) -> double& { return c.cull_radius; }));

  f.push_back(number<double>("eval-threshold", "eval", "F-score distance threshold (m)", [](RunConfig& c) -> double& { return c.eval.threshold; }));
  f.push_back(number<size_t>("eval-samples", "eval", "surface samples per mesh", [](RunConfig& c) -> size_t& { return c.eval.n_samples; }));

  f.push_back(text("scene", "synth", "preset (sphere | ground_sphere | corridor) or scene file", [](RunConfig& c) -> std::string& { return c.synth.scene; }));
  f.push_back(number<int>("frames", "synth", "scans to generate", [](RunConfig& c) -> int& { return c.synth.frames; }));
  f.push_back(number<int>("rays", "synth", "rays per scan", [](RunConfig& c) -> int& { return c.synth.rays; }));
  f.push_back(number<double>("noise", "synth", "range noise sigma (m)", [](RunConfig& c) -> double& { return c.synth.noise; }));
  f.push_back(number<double>("gt-spacing", "synth", "ground-truth cloud spacing (m)", [](RunConfig& c) -> double& { return c.synth.gt_spacing; }));

  f.push_back(number<uint64_t>("seed", "run", "random seed (N3_SEED overrides the config file)", [](RunConfig& c) -> uint64_t& { return c.mapper.seed; }));
  f.push_back(number<int>("frame-stride", "run", "use every n-th scan", [](RunConfig& c) -> int& { return c.frame_stride; }));
  f.push_back(number<int>("max-frames", "run", "stop after this many scans (0 = all)", [](RunConfig& c) -> int& { return c.max_frames; }));
  f.push_back(text("data", "run", "dataset directory (scans/ and poses.txt)", [](RunConfig& c) -> std::string& { return c.data_dir; }));
  f.push_back(text("out", "run", "output directory", [](RunConfig& c) -> std::string& { return c.out_dir; }));
  // clang-format on
  return f;
}

}  // namespace

const std::vector<ConfigField>& config_fields() {
  static const std::vector<ConfigField> fields = build_fields();
  return fields;
}

const ConfigField* find_field(const std::string& name) {
  std::string key = name;
  std::replace(key.begin(), key.end(), '_', '-');
  for (const auto& f : config_fields())
    if (f.name == key) return &f;
  return nullptr;
}

void RunConfig::validate() const {
  mapper.validate();
  if (feature_length != kFeatureDim)
    throw ConfigError("feature-length must be " + std::to_string(kFeatureDim) + " (fixed at build time)");
  if (hidden_width != kHiddenWidth)
    throw ConfigError("hidden-width must be " + std::to_string(kHiddenWidth) + " (fixed at build time)");
  if (normal_k < 3) throw ConfigError("knn must be at least 3");
  if (frame_stride < 1) throw ConfigError("frame-stride must be positive");
  if (max_frames < 0) throw ConfigError("max-frames must be non-negative");
  if (mc_voxel < 0 || cull_radius < 0) throw ConfigError("mc-voxel and cull-radius must be non-negative");
  if (!(eval.threshold > 0)) throw ConfigError("eval-threshold must be positive");
  if (eval.n_samples < 1) throw ConfigError("eval-samples must be positive");
  if (synth.frames < 1 || synth.rays < 1) throw ConfigError("frames and rays must be positive");
  if (synth.noise < 0 || !(synth.gt_spacing > 0)) throw ConfigError("noise must be >= 0 and gt-spacing > 0");
}

RunConfig preset_config(const std::string& name) {
  RunConfig cfg;
  if (name.empty() || name == "outdoor") return cfg;
  if (name == "indoor") {
    cfg.mapper.map.leaf_size = 0.04;
    cfg.mapper.sampler.tr = 0.03;
    cfg.mapper.sampler.sigma = 0.01;
    cfg.mapper.sampler.free_min_distance = 0.2;
    cfg.mapper.train.window_range = 6.0;
    cfg.eval.threshold = 0.05;
    return cfg;
  }
  throw ConfigError("unknown preset '" + name + "' (expected outdoor or indoor)");
}

void apply_config_text(RunConfig& cfg, const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line, section;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = origin + ":" + std::to_string(line_no);
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const size_t eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const ConfigField* f = find_field(key);
    if (!f) throw ConfigError(where + ": unknown key '" + key + "'");
    if (!section.empty() && section != f->section)
      throw ConfigError(where + ": key '" + key + "' belongs to [" + f->section + "], not [" + section + "]");
    try {
      f->set(cfg, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + ": " + e.what());
    }
  }
}

void apply_config_file(RunConfig& cfg, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  apply_config_text(cfg, ss.str(), path.string());
}

bool apply_seed_env(RunConfig& cfg) {
  const char* env = std::getenv("N3_SEED");
  if (!env || !*env) return false;
  cfg.mapper.seed = parse_number<uint64_t>("N3_SEED", env);
  return true;
}

std::string config_to_text(const RunConfig& cfg) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<const ConfigField*>> by_section;
  for (const auto& f : config_fields()) {
    if (!by_section.contains(f.section)) order.push_back(f.section);
    by_section[f.section].push_back(&f);
  }
  std::ostringstream out;
  for (size_t i = 0; i < order.size(); ++i) {
    if (i) out << '\n';
    out << '[' << order[i] << "]\n";
    for (const ConfigField* f : by_section[order[i]]) out << f->name << " = " << f->get(cfg) << '\n';
  }
  return out.str();
}

}  // namespace n3map
