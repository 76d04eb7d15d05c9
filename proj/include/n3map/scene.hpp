#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "n3map/types.hpp"

// Analytic test scenes. Every primitive has an exact signed distance
// (positive outside the solid), so synthetic scans and labels can be checked
// against ground truth.
namespace n3map {

enum class PrimitiveKind : uint8_t { kSphere, kBox, kSineGround };

struct Primitive {
  PrimitiveKind kind = PrimitiveKind::kSphere;
  Vec3 center = Vec3::Zero();  // sine ground: only center.z (base height) is used
  double radius = 1.0;
  Vec3 half_extents = Vec3::Ones();
  double amplitude = 0.2;
  double wavelength = 6.283185307179586;

  static Primitive sphere(const Vec3& center, double radius);
  static Primitive box(const Vec3& center, const Vec3& half_extents);
  // z = base + amplitude * sin(2*pi*x / wavelength), invariant along y.
  static Primitive sine_ground(double base, double amplitude, double wavelength);
};

enum class RayPattern : uint8_t {
  kTarget,  // cone aimed at the scene's bounding sphere
  kLidar,   // spinning multi-beam pattern (elevation rings x azimuth steps)
  kSphere,  // uniform over the full sphere of directions
};

struct SceneSpec {
  std::vector<Primitive> primitives;  // union of solids
  std::vector<Vec3> trajectory;       // sensor origins, world frame
  int rays_per_scan = 20000;
  RayPattern pattern = RayPattern::kTarget;
  double range_noise_sigma = 0.0;
  double max_range = 60.0;
  // lidar pattern
  int lidar_beams = 32;
  double lidar_elev_min_deg = -30.0;
  double lidar_elev_max_deg = 10.0;

  void validate() const;  // throws ConfigError
};

double primitive_sdf(const Primitive& prim, const Vec3& x);
Vec3 primitive_gradient(const Primitive& prim, const Vec3& x);

// Exact signed distance of the union of the scene's primitives.
double oracle_sdf(const SceneSpec& scene, const Vec3& x);
// Unit outward gradient of oracle_sdf (the surface normal on the surface).
Vec3 oracle_gradient(const SceneSpec& scene, const Vec3& x);

struct SynthStats {
  size_t rays = 0;
  size_t hits = 0;
};

// Sphere-traces each ray against the analytic scene. Normals are the analytic
// gradients oriented towards the sensor; misses are dropped. Range noise (if
// any) is drawn from `seed`.
ScanFrame synth_scan(const SceneSpec& scene, const Vec3& origin, const std::vector<Vec3>& ray_directions,
                     uint64_t seed = 0, SynthStats* stats = nullptr);

// Ray directions for one scan from `origin` according to scene.pattern.
std::vector<Vec3> scan_directions(const SceneSpec& scene, const Vec3& origin);

std::vector<Vec3> fibonacci_sphere(int n);
std::vector<Vec3> cone_directions(const Vec3& axis, double half_angle_rad, int n);
std::vector<Vec3> lidar_directions(int beams, int azimuth_steps, double elev_min_deg, double elev_max_deg);

std::vector<Vec3> orbit_trajectory(const Vec3& center, double radius, double height, int frames);
std::vector<Vec3> line_trajectory(const Vec3& start, const Vec3& end, int frames);

// Points on the union surface with roughly `spacing` separation, restricted to
// the axis-aligned box [lo, hi] (used for sine ground extents).
std::vector<Vec3> sample_scene_surface(const SceneSpec& scene, double spacing, const Vec3& lo,
                                       const Vec3& hi);

// key = value text form used by scene.cfg.
std::string scene_to_text(const SceneSpec& scene);
SceneSpec scene_from_text(const std::string& text);
SceneSpec read_scene_file(const std::filesystem::path& path);

}  // namespace n3map
