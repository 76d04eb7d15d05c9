#include <doctest.h>

#include <cstdlib>
#include <initializer_list>
#include <string>
#include <sys/wait.h>

#include "n3map/commands.hpp"
#include "n3map/config.hpp"
#include "n3map/errors.hpp"
#include "test_util.hpp"

using namespace n3map;
namespace fs = std::filesystem;

namespace {

int cli(std::initializer_list<std::string> args) {
  std::vector<std::string> store{"n3map"};
  store.insert(store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& s : store) argv.push_back(s.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

struct SeedEnv {
  explicit SeedEnv(const char* v) { ::setenv("N3_SEED", v, 1); }
  ~SeedEnv() { ::unsetenv("N3_SEED"); }
};

}  // namespace

TEST_CASE("config text round trip") {
  RunConfig cfg = preset_config("indoor");
  cfg.mapper.sampler.sigma = 0.0125;
  cfg.mapper.train.window_mode = WindowMode::kKeyframe;
  cfg.synth.scene = "corridor";
  RunConfig back = preset_config("outdoor");
  apply_config_text(back, config_to_text(cfg));
  CHECK(config_to_text(back) == config_to_text(cfg));
  CHECK(back.mapper.sampler.sigma == 0.0125);
  CHECK(back.mapper.map.leaf_size == 0.04);
}

TEST_CASE("indoor and outdoor presets") {
  const RunConfig out = preset_config("outdoor");
  CHECK(out.mapper.map.leaf_size == 0.2);
  CHECK(out.mapper.sampler.tr == doctest::Approx(0.3));
  const RunConfig in = preset_config("indoor");
  CHECK(in.mapper.map.leaf_size == 0.04);
  CHECK(in.mapper.sampler.tr == doctest::Approx(0.03));
  CHECK_THROWS_AS(preset_config("underwater"), ConfigError);
}

TEST_CASE("config file syntax") {
  RunConfig cfg;
  apply_config_text(cfg, "# comment\n[sampling]\nsigma = 0.07\nn_surface = 5\n\n[training]\niters = 12\n");
  CHECK(cfg.mapper.sampler.sigma == 0.07);
  CHECK(cfg.mapper.sampler.n_surface == 5);
  CHECK(cfg.mapper.train.iters == 12);
  try {
    apply_config_text(cfg, "sigma = 0.1\nbogus = 3\n", "x.cfg");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("x.cfg:2") != std::string::npos);
  }
  CHECK_THROWS_AS(apply_config_text(cfg, "[training]\nsigma = 0.1\n"), ConfigError);
  CHECK_THROWS_AS(apply_config_text(cfg, "iters = many\n"), ConfigError);
  CHECK_THROWS_AS(apply_config_text(cfg, "strategy = sideways\n"), ConfigError);
}

TEST_CASE("validation rejects inconsistent configs") {
  RunConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.feature_length = 16;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = RunConfig{};
  cfg.mapper.sampler.tr = -1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = RunConfig{};
  cfg.frame_stride = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("seed precedence: file, then environment, then flag") {
  testutil::TempDir dir;
  testutil::write_file(dir / "a.cfg", "seed = 5\n");
  RunConfig cfg;
  apply_config_file(cfg, dir / "a.cfg");
  CHECK(cfg.mapper.seed == 5);
  {
    SeedEnv env("7");
    CHECK(apply_seed_env(cfg));
    CHECK(cfg.mapper.seed == 7);
    const std::string out = (dir / "o1").string();
    CHECK(cli({"synth", "--config", (dir / "a.cfg").string(), "--out", out, "--frames", "1", "--rays", "200"}) ==
          kExitOk);
    RunConfig echoed;
    apply_config_file(echoed, fs::path(out) / "run.cfg");
    CHECK(echoed.mapper.seed == 7);
    const std::string out2 = (dir / "o2").string();
    CHECK(cli({"synth", "--config", (dir / "a.cfg").string(), "--seed", "9", "--out", out2, "--frames", "1",
               "--rays", "200"}) == kExitOk);
    apply_config_file(echoed, fs::path(out2) / "run.cfg");
    CHECK(echoed.mapper.seed == 9);
  }
  RunConfig plain;
  CHECK_FALSE(apply_seed_env(plain));
}

TEST_CASE("exit codes") {
  testutil::TempDir dir;
  CHECK(cli({}) == kExitUsage);
  CHECK(cli({"teleport"}) == kExitUsage);
  CHECK(cli({"map", "--sigma", "abc", "--out", (dir / "x").string()}) == kExitUsage);
  CHECK(cli({"synth", "--scene", (dir / "nope.cfg").string(), "--out", (dir / "y").string()}) != kExitOk);
  testutil::write_file(dir / "bad_scene.cfg", "rays = -4\n");
  CHECK(cli({"synth", "--scene", (dir / "bad_scene.cfg").string(), "--out", (dir / "y").string()}) == kExitUsage);
  CHECK(cli({"map", "--data", (dir / "absent").string(), "--out", (dir / "z").string()}) == kExitData);
  fs::create_directories(dir / "noposes" / "scans");
  CHECK(cli({"map", "--data", (dir / "noposes").string(), "--out", (dir / "z").string()}) == kExitData);
  CHECK(cli({"mesh", "--map", (dir / "none.n3m").string(), "--out", (dir / "z").string()}) == kExitData);
  CHECK(cli({"ablate", "--rows", "9", "--out", (dir / "z").string()}) == kExitUsage);
}

TEST_CASE("synth output is byte-identical for the same seed") {
  testutil::TempDir dir;
  for (const char* name : {"a", "b"})
    REQUIRE(cli({"synth", "--scene", "sphere", "--frames", "2", "--rays", "500", "--noise", "0.01", "--seed", "3",
                 "--out", (dir / name).string()}) == kExitOk);
  for (const char* f : {"poses.txt", "gt.ply", "scans/000000.ply", "scans/000001.ply", "scene.cfg"})
    CHECK(testutil::read_file(dir / "a" / f) == testutil::read_file(dir / "b" / f));
  REQUIRE(cli({"synth", "--scene", "sphere", "--frames", "2", "--rays", "500", "--noise", "0.01", "--seed", "4",
               "--out", (dir / "c").string()}) == kExitOk);
  CHECK(testutil::read_file(dir / "a" / "scans/000001.ply") != testutil::read_file(dir / "c" / "scans/000001.ply"));
}

TEST_CASE("synth, map, mesh and eval chain") {
  testutil::TempDir dir;
  const std::string data = (dir / "data").string(), out = (dir / "out").string();
  REQUIRE(cli({"synth", "--scene", "sphere", "--frames", "2", "--rays", "3000", "--out", data}) == kExitOk);
  REQUIRE(cli({"map", "--data", data, "--out", out, "--iters", "5", "--n-voxels", "128", "--sigma", "0.05", "--tr",
               "0.15"}) == kExitOk);
  CHECK(fs::exists(fs::path(out) / "map.n3m"));
  CHECK(fs::exists(fs::path(out) / "observed.ply"));
  const std::string loss = testutil::read_file(fs::path(out) / "loss.csv");
  CHECK(loss.rfind("frame,iter,bce,eikonal,total\n", 0) == 0);
  REQUIRE(cli({"mesh", "--out", out, "--cull-ref", out + "/observed.ply"}) == kExitOk);
  REQUIRE(cli({"eval", "--out", out, "--pred", out + "/mesh.ply", "--gt", data + "/gt.ply", "--eval-samples",
               "20000"}) == kExitOk);
  const auto rows = read_metrics_csv(fs::path(out) / "report.csv");
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].n_pred == 20000);
  CHECK(fs::exists(fs::path(out) / "report.jsonl"));
  RunConfig echoed;
  apply_config_file(echoed, fs::path(out) / "run.cfg");
  CHECK(echoed.eval.n_samples == 20000);
}

TEST_CASE("audit writes one row per strategy") {
  testutil::TempDir dir;
  REQUIRE(cli({"audit", "--frames", "1", "--rays", "2000", "--out", dir.path().string()}) == kExitOk);
  const std::string csv = testutil::read_file(dir / "audit.csv");
  CHECK(csv.find("normal_guided") != std::string::npos);
  CHECK(csv.find("corrected") != std::string::npos);
  CHECK(csv.find("projective") != std::string::npos);
}

TEST_CASE("installed binary reports usage errors through its exit status") {
  const char* bin = std::getenv("N3MAP_BIN");
  REQUIRE(bin != nullptr);
  const int help = std::system((std::string(bin) + " --help > /dev/null").c_str());
  CHECK(WEXITSTATUS(help) == 0);
  const int bad = std::system((std::string(bin) + " map --iters x > /dev/null 2>&1").c_str());
  CHECK(WEXITSTATUS(bad) == kExitUsage);
}
