#include <doctest.h>

#include <cmath>
#include <numeric>
#include <set>

#include "n3map/errors.hpp"
#include "n3map/losses.hpp"
#include "n3map/mapper.hpp"
#include "n3map/scene.hpp"
#include "n3map/voxel_store.hpp"

using namespace n3map;

namespace {

TrainingPair pair_at(const Vec3& q, int tag = 0) {
  TrainingPair p;
  p.query = q;
  p.source_frame = tag;
  return p;
}

SceneSpec ball_scene(const Vec3& center) {
  SceneSpec s;
  s.primitives.push_back(Primitive::sphere(center, 1.5));
  s.rays_per_scan = 3000;
  return s;
}

ScanFrame ball_scan(const Vec3& center, const Vec3& origin, int index = 0) {
  const SceneSpec s = ball_scene(center);
  ScanFrame f = synth_scan(s, origin, scan_directions(s, origin), 7);
  f.frame_index = index;
  return f;
}

MapperConfig small_config() {
  MapperConfig cfg;
  cfg.sampler.sigma = 0.05;
  cfg.sampler.tr = 0.15;
  cfg.loss.tr = 0.15;
  cfg.train.iters = 10;
  cfg.train.hierarchical.n_voxels = 256;
  cfg.train.freeze_after = 0;
  cfg.seed = 11;
  return cfg;
}

}  // namespace

TEST_CASE("sigmoid examples") {
  CHECK(sigmoid_map(0.0, 0.1) == 0.5);
  CHECK(sigmoid_map(0.3, 0.1) == doctest::Approx(0.952574).epsilon(1e-6));
  CHECK(sigmoid_map(-0.3, 0.1) == doctest::Approx(1 - 0.952574).epsilon(1e-5));
  CHECK(sigmoid_map(1000.0, 0.1) == 1.0);
}

TEST_CASE("binary cross-entropy examples") {
  CHECK(bce_loss(1.0, 0.5) == doctest::Approx(std::log(2.0)));
  CHECK(bce_loss(0.5, 0.5) == doctest::Approx(std::log(2.0)));
  CHECK(bce_loss(1.0, 0.0) == doctest::Approx(-std::log(1e-7)));
  CHECK(bce_loss(0.0, 0.0) == doctest::Approx(1e-7).epsilon(1e-3));
  CHECK(std::isfinite(bce_loss(0.0, 1.0)));
  // Minimised where prediction equals the label.
  const BceTerm at = bce_from_sdf(0.07, 0.07, 0.1);
  CHECK(at.d_pred == doctest::Approx(0.0));
  CHECK(bce_from_sdf(0.07, 0.2, 0.1).d_pred > 0);
  CHECK(bce_from_sdf(0.07, -0.2, 0.1).d_pred < 0);
  CHECK(bce_from_sdf(0.0, 50.0, 0.1).d_pred == 0.0);  // clamp active
}

TEST_CASE("eikonal examples") {
  CHECK(eikonal_loss(Vec3(0.6, 0.8, 0)) == doctest::Approx(0.0));
  CHECK(eikonal_loss(Vec3(0, 0, 2)) == doctest::Approx(1.0));
  CHECK(eikonal_loss(Vec3::Zero()) == doctest::Approx(1.0));
  CHECK(eikonal_loss(Vec3(0.5, 0, 0)) == doctest::Approx(0.25));
}

TEST_CASE("loss config validation") {
  LossConfig c;
  CHECK_NOTHROW(c.validate());
  c.beta = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = LossConfig{};
  c.lambda_e = -1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("sliding window examples") {
  const SlidingWindow w = update_window(Vec3(1.05, -0.32, 0.5), 30.0, 0.2);
  CHECK(w.center == Vec3i(5, -2, 2));
  CHECK(w.half_extent == 150);
  CHECK(w.lower == Vec3i(-145, -152, -148));
  CHECK(w.upper == Vec3i(155, 148, 152));
  CHECK(w.contains(Vec3i(155, 148, 152)));
  CHECK(w.contains(Vec3i(-145, -152, -148)));
  CHECK_FALSE(w.contains(Vec3i(156, 0, 0)));
  CHECK_FALSE(w.contains(Vec3i(0, -153, 0)));
  CHECK(w.voxel_capacity() == 301ull * 301 * 301);
  CHECK_THROWS_AS(update_window(Vec3::Zero(), 0.0, 0.2), ConfigError);
}

TEST_CASE("voxel store insert examples") {
  VoxelBlockStore store(0.2, 4);
  Rng rng(1);
  store.insert(pair_at(Vec3(0.05, 0.05, 0.05)), rng);
  store.insert(pair_at(Vec3(0.15, 0.19, 0.01)), rng);
  store.insert(pair_at(Vec3(-0.05, 0.05, 0.05)), rng);
  CHECK(store.voxel_count() == 2);
  CHECK(store.total_pairs() == 3);
  REQUIRE(store.find(Vec3i(0, 0, 0)) != nullptr);
  CHECK(store.find(Vec3i(0, 0, 0))->pairs.size() == 2);
  CHECK(store.find(Vec3i(-1, 0, 0))->pairs.size() == 1);
  CHECK(store.find(Vec3i(5, 5, 5)) == nullptr);
  for (int i = 0; i < 10; ++i) store.insert(pair_at(Vec3(0.1, 0.1, 0.1)), rng);
  CHECK(store.find(Vec3i(0, 0, 0))->pairs.size() == 4);
  CHECK(store.find(Vec3i(0, 0, 0))->seen == 12);
  CHECK(store.total_pairs() == 5);
}

TEST_CASE("reservoir keeps every offered pair with equal probability") {
  const int offered = 1000, cap = 100, trials = 2000;
  std::vector<int> kept(offered, 0);
  Rng rng(17);
  for (int t = 0; t < trials; ++t) {
    VoxelBlockStore store(1.0, cap);
    for (int i = 0; i < offered; ++i) store.insert(pair_at(Vec3(0.5, 0.5, 0.5), i), rng);
    const VoxelBlock* b = store.find(Vec3i::Zero());
    REQUIRE(b->pairs.size() == static_cast<size_t>(cap));
    for (const auto& p : b->pairs) ++kept[p.source_frame];
  }
  const double expected = static_cast<double>(trials) * cap / offered;
  double chi2 = 0;
  for (int k : kept) chi2 += (k - expected) * (k - expected) / expected;
  // df = 999: mean 999, sd about 45
  CHECK(chi2 < 999 + 4 * 45);
  CHECK(chi2 > 999 - 4 * 45);
}

TEST_CASE("eviction uses closed bounds and frees the dropped pairs") {
  VoxelBlockStore store(1.0, 0);
  Rng rng(2);
  for (int x = -4; x <= 4; ++x) store.insert(pair_at(Vec3(x + 0.5, 0.5, 0.5)), rng);
  SlidingWindow w;
  w.half_extent = 2;
  w.lower = Vec3i::Constant(-2);
  w.upper = Vec3i::Constant(2);
  CHECK(store.evict_outside(w) == 4);
  CHECK(store.voxel_count() == 5);
  CHECK(store.total_pairs() == 5);
  CHECK(store.find(Vec3i(2, 0, 0)) != nullptr);
  CHECK(store.find(Vec3i(-2, 0, 0)) != nullptr);
  CHECK(store.find(Vec3i(3, 0, 0)) == nullptr);
  CHECK(store.find(Vec3i(-3, 0, 0)) == nullptr);
  for (const auto& b : store.blocks()) CHECK(store.find(b.voxel) == &b);
  CHECK(store.evict_outside(w) == 0);
}

TEST_CASE("stored voxels never exceed the window capacity") {
  VoxelBlockStore store(0.5, 16);
  Rng rng(3);
  std::uniform_real_distribution<double> u(-20, 20);
  for (int step = 0; step < 20; ++step) {
    const Vec3 origin(step * 1.0, 0, 0);
    const SlidingWindow w = update_window(origin, 2.0, 0.5);
    store.evict_outside(w);
    for (int i = 0; i < 2000; ++i) {
      const Vec3 q = origin + Vec3(u(rng), u(rng), u(rng)) * 0.1;
      if (w.contains(store.voxel_of(q))) store.insert(pair_at(q), rng);
    }
    CHECK(store.voxel_count() <= w.voxel_capacity());
    CHECK(store.total_pairs() <= w.voxel_capacity() * 16);
    for (const auto& b : store.blocks()) CHECK(w.contains(b.voxel));
  }
}

TEST_CASE("pairs per voxel follows the threshold rule") {
  HierarchicalConfig cfg;
  CHECK(pairs_for_voxel(100, cfg) == 8);
  CHECK(pairs_for_voxel(33, cfg) == 8);
  CHECK(pairs_for_voxel(32, cfg) == 2);
  CHECK(pairs_for_voxel(10, cfg) == 2);
  CHECK(pairs_for_voxel(1, cfg) == 2);
  cfg.n_per_voxel = 2;
  CHECK(pairs_for_voxel(5, cfg) == 1);
}

TEST_CASE("hierarchical batch examples") {
  Rng rng(4);
  HierarchicalConfig cfg;
  SUBCASE("2048 occupied voxels give 1024 distinct ones") {
    VoxelBlockStore store(1.0, 0);
    for (int i = 0; i < 2048; ++i)
      for (int k = 0; k < 40; ++k) store.insert(pair_at(Vec3(i + 0.5, 0.5, 0.5), i), rng);
    const auto batch = hierarchical_sample(store, nullptr, cfg, rng);
    CHECK(batch.size() == 1024 * 8);
    std::set<int> voxels;
    for (const auto& p : batch) voxels.insert(p.source_frame);
    CHECK(voxels.size() == 1024);
  }
  SUBCASE("one voxel with 100 pairs gives 8 distinct pairs") {
    VoxelBlockStore store(1.0, 0);
    for (int i = 0; i < 100; ++i) store.insert(pair_at(Vec3(0.5, 0.5, 0.5), i), rng);
    const auto batch = hierarchical_sample(store, nullptr, cfg, rng);
    CHECK(batch.size() == 8);
    std::set<int> ids;
    for (const auto& p : batch) ids.insert(p.source_frame);
    CHECK(ids.size() == 8);
  }
  SUBCASE("one voxel with 10 pairs gives 2") {
    VoxelBlockStore store(1.0, 0);
    for (int i = 0; i < 10; ++i) store.insert(pair_at(Vec3(0.5, 0.5, 0.5), i), rng);
    const auto batch = hierarchical_sample(store, nullptr, cfg, rng);
    CHECK(batch.size() == 2);
    CHECK(batch[0].source_frame != batch[1].source_frame);
  }
  SUBCASE("window restricts the candidate voxels") {
    VoxelBlockStore store(1.0, 0);
    for (int i = 0; i < 10; ++i) store.insert(pair_at(Vec3(i + 0.5, 0.5, 0.5), i), rng);
    const SlidingWindow w = update_window(Vec3(0.5, 0.5, 0.5), 2.0, 1.0);
    const auto batch = hierarchical_sample(store, &w, cfg, rng);
    // voxels 0..2 are inside, each holding one pair below the threshold
    CHECK(batch.size() == 6);
    for (const auto& p : batch) CHECK(p.source_frame <= 2);
  }
  SUBCASE("empty store") {
    VoxelBlockStore store(1.0, 0);
    CHECK(hierarchical_sample(store, nullptr, cfg, rng).empty());
  }
}

TEST_CASE("voxel selection is fair between dense and sparse voxels") {
  VoxelBlockStore store(1.0, 0);
  Rng rng(5);
  const int n = 200;
  for (int i = 0; i < n; ++i) {
    const int count = i % 2 == 0 ? 4000 : 40;
    for (int k = 0; k < count; ++k) store.insert(pair_at(Vec3(i + 0.5, 0.5, 0.5), i), rng);
  }
  HierarchicalConfig cfg;
  cfg.n_voxels = 50;
  cfg.n_per_voxel = 1;
  std::vector<double> hits(n, 0);
  for (int b = 0; b < 2000; ++b)
    for (const auto& p : hierarchical_sample(store, nullptr, cfg, rng)) hits[p.source_frame] += 1;
  const double mean = std::accumulate(hits.begin(), hits.end(), 0.0) / n;
  double var = 0;
  for (double h : hits) var += (h - mean) * (h - mean);
  const double cv = std::sqrt(var / n) / mean;
  CHECK(mean == doctest::Approx(500.0));
  CHECK(cv < 0.1);
}

TEST_CASE("random sampling draws from the pool") {
  std::vector<TrainingPair> pairs{pair_at(Vec3::Zero(), 0), pair_at(Vec3::Zero(), 1)};
  std::vector<const TrainingPair*> pool{&pairs[0], &pairs[1]};
  Rng rng(6);
  const auto batch = random_sample(pool, 1000, rng);
  CHECK(batch.size() == 1000);
  const auto ones = std::count_if(batch.begin(), batch.end(), [](const auto& p) { return p.source_frame == 1; });
  CHECK(ones > 400);
  CHECK(ones < 600);
  CHECK(random_sample(std::span<const TrainingPair* const>{}, 10, rng).empty());
}

TEST_CASE("mode names parse and reject unknown values") {
  CHECK(parse_window_mode("voxel") == WindowMode::kVoxel);
  CHECK(parse_window_mode("keyframe") == WindowMode::kKeyframe);
  CHECK(parse_window_mode("replay") == WindowMode::kReplay);
  CHECK(parse_batch_sampling("hierarchical") == BatchSampling::kHierarchical);
  CHECK(parse_batch_sampling("random") == BatchSampling::kRandom);
  CHECK_THROWS_AS(parse_window_mode("sliding"), ConfigError);
  CHECK_THROWS_AS(parse_batch_sampling("uniform"), ConfigError);
  CHECK(std::string(to_string(WindowMode::kKeyframe)) == "keyframe");
}

TEST_CASE("adam step with a small learning rate reduces the loss") {
  MapperConfig cfg = small_config();
  ImplicitMap map(cfg.map, 3);
  map.allocate(std::vector<Vec3>{Vec3::Zero()}, 0.5);
  std::vector<TrainingPair> batch;
  for (int i = 0; i < 20; ++i) {
    TrainingPair p = pair_at(Vec3(0.02 * i - 0.2, 0.01 * i, 0));
    p.sdf_label = 0.1;
    batch.push_back(p);
  }
  AdamConfig ac;
  ac.learning_rate = 1e-4;
  AdamOptimizer opt(ac);
  Gradients grads;
  const double before = map.forward_backward(batch, cfg.loss, &grads).total;
  opt.step(map, grads);
  CHECK(opt.steps() == 1);
  CHECK(total_loss(batch, map, cfg.loss).total < before);
}

TEST_CASE("mapper ignores an empty scan") {
  Mapper mapper(small_config());
  ScanFrame empty;
  const FrameReport r = mapper.integrate(empty);
  CHECK(r.trace.empty());
  CHECK(mapper.frames_integrated() == 0);
  CHECK(mapper.map().grid().leaf_count() == 0);
  CHECK(mapper.stored_pairs() == 0);
}

TEST_CASE("mapper reduces the loss on a single frame") {
  MapperConfig cfg = small_config();
  cfg.train.iters = 30;
  Mapper mapper(cfg);
  const FrameReport r = mapper.integrate(ball_scan(Vec3::Zero(), Vec3(4, 0, 0)));
  REQUIRE(r.trace.size() == 30);
  CHECK(r.trace.back().total < r.trace.front().total);
  CHECK(r.new_leaves > 0);
  CHECK(r.stored_pairs == mapper.stored_pairs());
  CHECK(mapper.frames_integrated() == 1);
}

TEST_CASE("moving the window evicts old pairs and leaves old features alone") {
  MapperConfig cfg = small_config();
  cfg.train.window_range = 4.0;
  Mapper mapper(cfg);
  const FrameReport first = mapper.integrate(ball_scan(Vec3::Zero(), Vec3(4, 0, 0)));
  const auto features = mapper.map().grid().features();
  const FrameReport second = mapper.integrate(ball_scan(Vec3(100, 0, 0), Vec3(104, 0, 0), 1));
  CHECK(second.evicted_pairs == first.stored_pairs);
  for (const auto& b : mapper.store().blocks()) CHECK(mapper.window().contains(b.voxel));
  for (size_t i = 0; i < features.size(); ++i) CHECK(mapper.map().grid().features()[i] == features[i]);
}

TEST_CASE("frozen decoder stays bit-identical") {
  MapperConfig cfg = small_config();
  cfg.train.freeze_after = 1;
  Mapper mapper(cfg);
  const FrameReport r1 = mapper.integrate(ball_scan(Vec3::Zero(), Vec3(4, 0, 0)));
  CHECK(r1.decoder_frozen);
  const Eigen::VectorXd params = mapper.map().decoder().params();
  const auto features = mapper.map().grid().features();
  mapper.integrate(ball_scan(Vec3::Zero(), Vec3(0, 4, 0), 1));
  CHECK(mapper.map().decoder().params() == params);
  bool moved = false;
  for (size_t i = 0; i < features.size(); ++i) moved |= mapper.map().grid().features()[i] != features[i];
  CHECK(moved);
}

TEST_CASE("replay and voxel memories agree on one frame") {
  MapperConfig a = small_config();
  MapperConfig b = a;
  b.train.window_mode = WindowMode::kReplay;
  Mapper ma(a), mb(b);
  const ScanFrame f = ball_scan(Vec3::Zero(), Vec3(4, 0, 0));
  const FrameReport ra = ma.integrate(f);
  const FrameReport rb = mb.integrate(f);
  CHECK(ra.stored_pairs == rb.stored_pairs);
  CHECK(ma.map().decoder().params() == mb.map().decoder().params());
  REQUIRE(ra.trace.size() == rb.trace.size());
  for (size_t i = 0; i < ra.trace.size(); ++i) CHECK(ra.trace[i].total == rb.trace[i].total);
}

TEST_CASE("keyframe memory keeps the last K frames and replay grows") {
  MapperConfig k = small_config();
  k.train.window_mode = WindowMode::kKeyframe;
  k.train.keyframes = 2;
  k.train.iters = 1;
  MapperConfig r = k;
  r.train.window_mode = WindowMode::kReplay;
  Mapper mk(k), mr(r);
  std::vector<size_t> per_frame;
  size_t last_replay = 0;
  for (int i = 0; i < 5; ++i) {
    const double a = 0.6 * i;
    const ScanFrame f = ball_scan(Vec3::Zero(), Vec3(4 * std::cos(a), 4 * std::sin(a), 0), i);
    const FrameReport rk = mk.integrate(f);
    const FrameReport rr = mr.integrate(f);
    per_frame.push_back(rr.stored_pairs - last_replay);
    CHECK(rr.stored_pairs > last_replay);
    last_replay = rr.stored_pairs;
    const size_t window = per_frame.back() + (i > 0 ? per_frame[i - 1] : 0);
    CHECK(rk.stored_pairs == window);
  }
}

TEST_CASE("mapper config validation") {
  MapperConfig cfg = small_config();
  CHECK_NOTHROW(cfg.validate());
  cfg.train.iters = -1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = small_config();
  cfg.train.keyframes = 0;
  cfg.train.window_mode = WindowMode::kKeyframe;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = small_config();
  cfg.map.leaf_size = -1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
