#include "n3map/commands.hpp"

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "n3map/config.hpp"
#include "n3map/errors.hpp"
#include "n3map/map_io.hpp"
#include "n3map/pipeline.hpp"
#include "n3map/ply.hpp"

namespace n3map {

namespace fs = std::filesystem;

namespace {

struct Options {
  std::string config_file;
  std::string preset;
  std::map<std::string, std::string> fields;  // flag name -> raw value
  // command-specific paths
  std::string map_file, mesh_out, pred, gt, report, cull_ref, rows;
  double min_incidence = 60.0;
};

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("--config", o.config_file, "key = value configuration file");
  cmd->add_option("--preset", o.preset, "outdoor (default) or indoor");
  for (const auto& f : config_fields()) {
    auto* opt = cmd->add_option_function<std::string>(
        "--" + f.name, [&o, name = f.name](const std::string& v) { o.fields[name] = v; }, f.help);
    opt->group(f.section);
  }
}

RunConfig resolve(const Options& o) {
  RunConfig cfg = preset_config(o.preset);
  if (!o.config_file.empty()) apply_config_file(cfg, o.config_file);
  apply_seed_env(cfg);
  for (const auto& [name, value] : o.fields) {
    try {
      find_field(name)->set(cfg, value);
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("--") + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

void echo_config(const RunConfig& cfg) {
  fs::create_directories(cfg.out_dir);
  std::ofstream(fs::path(cfg.out_dir) / "run.cfg") << config_to_text(cfg);
}

std::string provenance_text(const RunConfig& cfg) { return config_to_text(cfg); }

void cmd_synth(const RunConfig& cfg) {
  const SceneSpec scene = make_scene(cfg.synth);
  const SynthData data = synth_frames(scene, cfg.mapper.seed, cfg.synth.noise);
  write_synth_dataset(cfg.out_dir, scene, data, cfg.synth.gt_spacing);
  size_t points = 0;
  for (const auto& f : data.frames) points += f.size();
  std::cerr << "synth scene=" << cfg.synth.scene << " frames=" << data.frames.size() << " points=" << points
            << " out=" << cfg.out_dir << '\n';
}

void cmd_map(const RunConfig& cfg) {
  if (cfg.data_dir.empty()) throw ConfigError("map needs --data");
  const std::vector<ScanFrame> frames = load_sequence(cfg.data_dir, cfg);
  Mapper mapper(cfg.mapper);
  const fs::path out(cfg.out_dir);
  std::ofstream trace(out / "loss.csv");
  run_mapping(mapper, frames, &trace, &std::cerr);
  save_map(out / "map.n3m", mapper.map(), provenance_text(cfg));
  write_ply_points(out / "observed.ply", voxel_subsample(gather_points(frames), cfg.mapper.map.leaf_size / 4));
  std::cerr << "map saved to " << (out / "map.n3m").string() << " leaves=" << mapper.map().grid().leaf_count()
            << " stored_pairs=" << mapper.stored_pairs() << '\n';
}

std::vector<Vec3> read_points(const std::string& path) { return read_ply_cloud(path).points; }

void cmd_mesh(const RunConfig& cfg, const Options& o) {
  const fs::path map_path = o.map_file.empty() ? fs::path(cfg.out_dir) / "map.n3m" : fs::path(o.map_file);
  const ImplicitMap map = load_map(map_path);
  const double leaf = map.config().leaf_size;
  TriangleMesh mesh = extract_mesh(map, cfg.mc_voxel > 0 ? cfg.mc_voxel : leaf);
  const size_t raw = mesh.triangles.size();
  if (!o.cull_ref.empty())
    mesh = cull_unobserved(mesh, read_points(o.cull_ref), cfg.cull_radius > 0 ? cfg.cull_radius : 2 * leaf);
  const fs::path out = o.mesh_out.empty() ? fs::path(cfg.out_dir) / "mesh.ply" : fs::path(o.mesh_out);
  write_mesh_ply(out, mesh);
  std::cerr << "mesh vertices=" << mesh.vertices.size() << " triangles=" << mesh.triangles.size()
            << " culled=" << raw - mesh.triangles.size() << " out=" << out.string() << '\n';
}

GroundTruth read_ground_truth(const std::string& path) {
  const ply::File file = ply::read(path);
  GroundTruth gt;
  const ply::Element* face = file.find("face");
  if (face && face->count > 0) {
    gt.is_cloud = false;
    gt.mesh = read_mesh_ply(path);
  } else {
    gt.points = read_points(path);
  }
  return gt;
}

void cmd_eval(const RunConfig& cfg, const Options& o) {
  if (o.pred.empty() || o.gt.empty()) throw ConfigError("eval needs --pred and --gt");
  const TriangleMesh pred = read_mesh_ply(o.pred);
  const GroundTruth gt = read_ground_truth(o.gt);
  EvalConfig ecfg = cfg.eval;
  ecfg.seed = cfg.mapper.seed;
  ecfg.cull_radius = cfg.effective_cull_radius();
  std::vector<Vec3> reference;
  if (!o.cull_ref.empty()) reference = read_points(o.cull_ref);
  const MetricsReport r = evaluate_run(pred, gt, ecfg, o.cull_ref.empty() ? nullptr : &reference);
  const fs::path report = o.report.empty() ? fs::path(cfg.out_dir) / "report.csv" : fs::path(o.report);
  append_metrics_csv(report, r);
  fs::path jsonl = report;
  jsonl.replace_extension(".jsonl");
  std::map<std::string, std::string> prov;
  for (const auto& f : config_fields()) prov[f.name] = f.get(cfg);
  prov["pred"] = o.pred;
  prov["gt"] = o.gt;
  prov["cull_reference"] = o.cull_ref;
  append_metrics_jsonl(jsonl, r, prov);
  std::cerr << metrics_csv_row(r) << '\n';
}

void cmd_audit(const RunConfig& cfg, const Options& o) {
  const SceneSpec scene = make_scene(cfg.synth);
  const SynthData data = synth_frames(scene, cfg.mapper.seed, cfg.synth.noise);
  const auto rows = label_audit(scene, data.frames, cfg.mapper.sampler,
                                {LabelStrategy::kNormalGuided, LabelStrategy::kCorrected, LabelStrategy::kProjective},
                                cfg.mapper.seed, o.min_incidence);
  write_audit_csv(fs::path(cfg.out_dir) / "audit.csv", rows);
  for (const auto& r : rows)
    std::cerr << "audit strategy=" << to_string(r.strategy) << " rmse_m=" << r.rmse_m << " n=" << r.n_pairs << '\n';
}

std::vector<int> parse_rows(const std::string& text) {
  std::vector<int> rows;
  if (text.empty() || text == "all") return rows;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      size_t used = 0;
      rows.push_back(std::stoi(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw ConfigError("invalid --rows entry '" + tok + "'");
    }
  }
  return rows;
}

void cmd_ablate(const RunConfig& cfg, const Options& o) {
  const auto results = run_ablation(cfg, parse_rows(o.rows), &std::cerr);
  write_ablation_csv(fs::path(cfg.out_dir) / "ablation.csv", results);
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Incremental neural implicit SDF mapping"};
  app.require_subcommand(1);
  Options o;

  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  auto* map = app.add_subcommand("map", "train a map from a dataset");
  auto* mesh = app.add_subcommand("mesh", "extract a mesh from a saved map");
  auto* eval = app.add_subcommand("eval", "score a mesh against ground truth");
  auto* audit = app.add_subcommand("audit", "compare label strategies against the exact SDF");
  auto* ablate = app.add_subcommand("ablate", "run the ablation grid on a synthetic scene");
  for (auto* c : {synth, map, mesh, eval, audit, ablate}) add_common(c, o);
  mesh->add_option("--map", o.map_file, "map file (default <out>/map.n3m)");
  mesh->add_option("--output", o.mesh_out, "mesh PLY (default <out>/mesh.ply)");
  mesh->add_option("--cull-ref", o.cull_ref, "point cloud PLY used for culling");
  eval->add_option("--pred", o.pred, "predicted mesh PLY");
  eval->add_option("--gt", o.gt, "ground truth PLY (mesh or cloud)");
  eval->add_option("--report", o.report, "CSV report (default <out>/report.csv)");
  eval->add_option("--cull-ref", o.cull_ref, "point cloud PLY used for culling");
  audit->add_option("--min-incidence", o.min_incidence, "only rays above this incidence angle (deg)");
  ablate->add_option("--rows", o.rows, "comma-separated rows 1..7 or all");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    const RunConfig cfg = resolve(o);
    echo_config(cfg);
    if (synth->parsed()) cmd_synth(cfg);
    else if (map->parsed()) cmd_map(cfg);
    else if (mesh->parsed()) cmd_mesh(cfg, o);
    else if (eval->parsed()) cmd_eval(cfg, o);
    else if (audit->parsed()) cmd_audit(cfg, o);
    else if (ablate->parsed()) cmd_ablate(cfg, o);
    return kExitOk;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const FormatError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const OutOfMapError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  }
}

}  // namespace n3map
