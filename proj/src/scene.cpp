#include "n3map/scene.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "n3map/errors.hpp"

namespace n3map {
namespace {

constexpr double kHitTolerance = 1e-6;
constexpr int kMaxTraceSteps = 256;

struct SineCurve {
  double base, amp, k;
  [[nodiscard]] double f(double s) const { return base + amp * std::sin(k * s); }
  [[nodiscard]] double df(double s) const { return amp * k * std::cos(k * s); }
  [[nodiscard]] double ddf(double s) const { return -amp * k * k * std::sin(k * s); }
};

// Closest curve parameter s to the point (x, z) in the xz-plane.
double closest_on_sine(const SineCurve& c, double x, double z) {
  const double vertical = std::abs(z - c.f(x));
  if (vertical == 0.0) return x;
  const double wavelength = 2.0 * std::numbers::pi / c.k;
  // The closest point lies within the vertical distance of x.
  const double lo = x - vertical, hi = x + vertical;
  const int n = static_cast<int>(std::clamp(std::ceil((hi - lo) / (wavelength / 64.0)), 16.0, 8192.0));
  auto dist2 = [&](double s) {
    const double dz = z - c.f(s);
    return (x - s) * (x - s) + dz * dz;
  };
  double best_s = x, best_d = dist2(x);
  const double h = (hi - lo) / n;
  for (int i = 0; i <= n; ++i) {
    const double s = lo + h * i;
    const double d = dist2(s);
    if (d < best_d) {
      best_d = d;
      best_s = s;
    }
  }
  // Safeguarded Newton on the stationarity condition g(s) = 0 inside the
  // bracketing cell; g < 0 left of the minimum, g > 0 right of it.
  auto g = [&](double s) { return (s - x) + (c.f(s) - z) * c.df(s); };
  double a = std::max(lo, best_s - h), b = std::min(hi, best_s + h);
  double s = best_s;
  for (int it = 0; it < 100; ++it) {
    const double gs = g(s);
    if (gs == 0.0) break;
    if (gs < 0) a = s;
    else b = s;
    const double gp = 1.0 + c.df(s) * c.df(s) + (c.f(s) - z) * c.ddf(s);
    double next = gp > 0.0 ? s - gs / gp : 0.5 * (a + b);
    if (!(next > a && next < b)) next = 0.5 * (a + b);
    const bool done = std::abs(next - s) <= 1e-15 * std::max(1.0, std::abs(s));
    s = next;
    if (done) break;
  }
  return dist2(s) <= best_d ? s : best_s;
}

SineCurve curve_of(const Primitive& p) {
  return {p.center.z(), p.amplitude, 2.0 * std::numbers::pi / p.wavelength};
}

size_t closest_primitive(const SceneSpec& scene, const Vec3& x) {
  size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < scene.primitives.size(); ++i) {
    const double d = primitive_sdf(scene.primitives[i], x);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

// Orthonormal basis with `axis` as the third column.
Mat3 frame_around(const Vec3& axis) {
  const Vec3 w = axis.normalized();
  const Vec3 helper = std::abs(w.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  const Vec3 u = w.cross(helper).normalized();
  const Vec3 v = w.cross(u);
  Mat3 m;
  m.col(0) = u;
  m.col(1) = v;
  m.col(2) = w;
  return m;
}

std::vector<double> parse_numbers(std::istringstream& ss, size_t expected, const std::string& line) {
  std::vector<double> v;
  double d;
  while (ss >> d) v.push_back(d);
  if (v.size() != expected) throw ConfigError("scene: wrong number of values in '" + line + "'");
  return v;
}

}  // namespace

Primitive Primitive::sphere(const Vec3& center, double radius) {
  Primitive p;
  p.kind = PrimitiveKind::kSphere;
  p.center = center;
  p.radius = radius;
  return p;
}

Primitive Primitive::box(const Vec3& center, const Vec3& half_extents) {
  Primitive p;
  p.kind = PrimitiveKind::kBox;
  p.center = center;
  p.half_extents = half_extents;
  return p;
}

Primitive Primitive::sine_ground(double base, double amplitude, double wavelength) {
  Primitive p;
  p.kind = PrimitiveKind::kSineGround;
  p.center = Vec3(0, 0, base);
  p.amplitude = amplitude;
  p.wavelength = wavelength;
  return p;
}

void SceneSpec::validate() const {
  if (primitives.empty()) throw ConfigError("scene: no primitives");
  if (trajectory.empty()) throw ConfigError("scene: empty trajectory");
  for (const auto& p : primitives) {
    switch (p.kind) {
      case PrimitiveKind::kSphere:
        if (!(p.radius > 0)) throw ConfigError("scene: sphere radius must be positive");
        break;
      case PrimitiveKind::kBox:
        if (!(p.half_extents.minCoeff() > 0)) throw ConfigError("scene: box extents must be positive");
        break;
      case PrimitiveKind::kSineGround:
        if (!(p.amplitude > 0) || !(p.wavelength > 0))
          throw ConfigError("scene: sine amplitude and wavelength must be positive");
        break;
    }
  }
  if (rays_per_scan <= 0) throw ConfigError("scene: rays per scan must be positive");
  if (range_noise_sigma < 0) throw ConfigError("scene: noise sigma must be non-negative");
  if (!(max_range > 0)) throw ConfigError("scene: max range must be positive");
}

double primitive_sdf(const Primitive& prim, const Vec3& x) {
  switch (prim.kind) {
    case PrimitiveKind::kSphere:
      return (x - prim.center).norm() - prim.radius;
    case PrimitiveKind::kBox: {
      const Vec3 q = (x - prim.center).cwiseAbs() - prim.half_extents;
      return q.cwiseMax(0.0).norm() + std::min(q.maxCoeff(), 0.0);
    }
    case PrimitiveKind::kSineGround: {
      const SineCurve c = curve_of(prim);
      const double above = x.z() - c.f(x.x());
      if (above == 0.0) return 0.0;
      const double s = closest_on_sine(c, x.x(), x.z());
      const double d = std::hypot(x.x() - s, x.z() - c.f(s));
      return above > 0 ? d : -d;
    }
  }
  return 0.0;
}

Vec3 primitive_gradient(const Primitive& prim, const Vec3& x) {
  switch (prim.kind) {
    case PrimitiveKind::kSphere: {
      const Vec3 r = x - prim.center;
      const double n = r.norm();
      return n > 0 ? Vec3(r / n) : Vec3::UnitZ();
    }
    case PrimitiveKind::kBox: {
      const Vec3 rel = x - prim.center;
      const Vec3 q = rel.cwiseAbs() - prim.half_extents;
      Vec3 sign;
      for (int i = 0; i < 3; ++i) sign[i] = rel[i] < 0 ? -1.0 : 1.0;
      if (q.maxCoeff() > 0) {
        const Vec3 out = q.cwiseMax(0.0);
        return out.cwiseProduct(sign).normalized();
      }
      Eigen::Index axis;
      q.maxCoeff(&axis);
      Vec3 g = Vec3::Zero();
      g[axis] = sign[axis];
      return g;
    }
    case PrimitiveKind::kSineGround: {
      const SineCurve c = curve_of(prim);
      const double s = closest_on_sine(c, x.x(), x.z());
      const Vec3 diff(x.x() - s, 0.0, x.z() - c.f(s));
      const double d = diff.norm();
      if (d < 1e-9) return Vec3(-c.df(s), 0.0, 1.0).normalized();
      return (x.z() >= c.f(x.x()) ? 1.0 : -1.0) * diff / d;
    }
  }
  return Vec3::UnitZ();
}

double oracle_sdf(const SceneSpec& scene, const Vec3& x) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& p : scene.primitives) best = std::min(best, primitive_sdf(p, x));
  return best;
}

Vec3 oracle_gradient(const SceneSpec& scene, const Vec3& x) {
  return primitive_gradient(scene.primitives[closest_primitive(scene, x)], x);
}

ScanFrame synth_scan(const SceneSpec& scene, const Vec3& origin, const std::vector<Vec3>& ray_directions,
                     uint64_t seed, SynthStats* stats) {
  ScanFrame frame;
  frame.sensor_origin = origin;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, scene.range_noise_sigma > 0 ? scene.range_noise_sigma : 1.0);
  for (const Vec3& dir : ray_directions) {
    double t = 0.0;
    bool hit = false;
    for (int step = 0; step < kMaxTraceSteps; ++step) {
      const double s = oracle_sdf(scene, origin + t * dir);
      if (std::abs(s) < kHitTolerance) {
        hit = true;
        break;
      }
      t += s;
      if (t < 0.0 || t > scene.max_range) break;
    }
    if (!hit) continue;
    const Vec3 p = origin + t * dir;
    Vec3 n = oracle_gradient(scene, p);
    if (n.dot(origin - p) < 0) n = -n;
    double range = t;
    if (scene.range_noise_sigma > 0) range += noise(rng);
    frame.points.push_back(origin + range * dir);
    frame.normals.push_back(n);
  }
  frame.normal_flags.assign(frame.points.size(), NormalFlag::kValid);
  if (stats) {
    stats->rays = ray_directions.size();
    stats->hits = frame.points.size();
  }
  return frame;
}

std::vector<Vec3> fibonacci_sphere(int n) {
  std::vector<Vec3> dirs;
  dirs.reserve(n);
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < n; ++i) {
    const double z = 1.0 - 2.0 * (i + 0.5) / n;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden * i;
    dirs.emplace_back(r * std::cos(phi), r * std::sin(phi), z);
  }
  return dirs;
}

std::vector<Vec3> cone_directions(const Vec3& axis, double half_angle_rad, int n) {
  const Mat3 basis = frame_around(axis);
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  const double cos_max = std::cos(half_angle_rad);
  std::vector<Vec3> dirs;
  dirs.reserve(n);
  for (int i = 0; i < n; ++i) {
    const double z = 1.0 - (1.0 - cos_max) * (i + 0.5) / n;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden * i;
    dirs.push_back(basis * Vec3(r * std::cos(phi), r * std::sin(phi), z));
  }
  return dirs;
}

std::vector<Vec3> lidar_directions(int beams, int azimuth_steps, double elev_min_deg, double elev_max_deg) {
  std::vector<Vec3> dirs;
  dirs.reserve(static_cast<size_t>(beams) * azimuth_steps);
  const double deg = std::numbers::pi / 180.0;
  for (int b = 0; b < beams; ++b) {
    const double elev =
        beams == 1 ? elev_min_deg : elev_min_deg + (elev_max_deg - elev_min_deg) * b / (beams - 1);
    const double ce = std::cos(elev * deg), se = std::sin(elev * deg);
    for (int a = 0; a < azimuth_steps; ++a) {
      const double az = 2.0 * std::numbers::pi * a / azimuth_steps;
      dirs.emplace_back(ce * std::cos(az), ce * std::sin(az), se);
    }
  }
  return dirs;
}

std::vector<Vec3> scan_directions(const SceneSpec& scene, const Vec3& origin) {
  switch (scene.pattern) {
    case RayPattern::kSphere:
      return fibonacci_sphere(scene.rays_per_scan);
    case RayPattern::kLidar: {
      const int beams = std::max(1, scene.lidar_beams);
      const int steps = std::max(1, scene.rays_per_scan / beams);
      return lidar_directions(beams, steps, scene.lidar_elev_min_deg, scene.lidar_elev_max_deg);
    }
    case RayPattern::kTarget: {
      // Aim at the bounding sphere of the finite primitives.
      Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
      Vec3 hi = -lo;
      bool finite = false;
      for (const auto& p : scene.primitives) {
        Vec3 ext;
        if (p.kind == PrimitiveKind::kSphere) ext = Vec3::Constant(p.radius);
        else if (p.kind == PrimitiveKind::kBox) ext = p.half_extents;
        else continue;
        lo = lo.cwiseMin(p.center - ext);
        hi = hi.cwiseMax(p.center + ext);
        finite = true;
      }
      if (!finite) return fibonacci_sphere(scene.rays_per_scan);
      const Vec3 c = 0.5 * (lo + hi);
      const double radius = 0.5 * (hi - lo).norm();
      const Vec3 to = c - origin;
      const double dist = to.norm();
      if (dist <= radius * 1.0001) return fibonacci_sphere(scene.rays_per_scan);
      return cone_directions(to, std::asin(radius / dist), scene.rays_per_scan);
    }
  }
  return {};
}

std::vector<Vec3> orbit_trajectory(const Vec3& center, double radius, double height, int frames) {
  std::vector<Vec3> out;
  for (int i = 0; i < frames; ++i) {
    const double a = 2.0 * std::numbers::pi * i / frames;
    out.push_back(center + Vec3(radius * std::cos(a), radius * std::sin(a), height));
  }
  return out;
}

std::vector<Vec3> line_trajectory(const Vec3& start, const Vec3& end, int frames) {
  std::vector<Vec3> out;
  for (int i = 0; i < frames; ++i) {
    const double u = frames == 1 ? 0.0 : static_cast<double>(i) / (frames - 1);
    out.push_back(start + u * (end - start));
  }
  return out;
}

std::vector<Vec3> sample_scene_surface(const SceneSpec& scene, double spacing, const Vec3& lo,
                                       const Vec3& hi) {
  std::vector<Vec3> candidates;
  for (const auto& p : scene.primitives) {
    switch (p.kind) {
      case PrimitiveKind::kSphere: {
        const int n = std::max(16, static_cast<int>(4.0 * std::numbers::pi * p.radius * p.radius /
                                                    (spacing * spacing)));
        for (const Vec3& d : fibonacci_sphere(n)) candidates.push_back(p.center + p.radius * d);
        break;
      }
      case PrimitiveKind::kBox: {
        for (int axis = 0; axis < 3; ++axis) {
          const int u = (axis + 1) % 3, v = (axis + 2) % 3;
          const int nu = std::max(1, static_cast<int>(std::ceil(2 * p.half_extents[u] / spacing)));
          const int nv = std::max(1, static_cast<int>(std::ceil(2 * p.half_extents[v] / spacing)));
          for (int side = -1; side <= 1; side += 2) {
            for (int i = 0; i <= nu; ++i) {
              for (int j = 0; j <= nv; ++j) {
                Vec3 q;
                q[axis] = side * p.half_extents[axis];
                q[u] = -p.half_extents[u] + 2 * p.half_extents[u] * i / nu;
                q[v] = -p.half_extents[v] + 2 * p.half_extents[v] * j / nv;
                candidates.push_back(p.center + q);
              }
            }
          }
        }
        break;
      }
      case PrimitiveKind::kSineGround: {
        const SineCurve c = curve_of(p);
        const int nx = std::max(1, static_cast<int>(std::ceil((hi.x() - lo.x()) / spacing)));
        const int ny = std::max(1, static_cast<int>(std::ceil((hi.y() - lo.y()) / spacing)));
        for (int i = 0; i <= nx; ++i) {
          const double x = lo.x() + (hi.x() - lo.x()) * i / nx;
          for (int j = 0; j <= ny; ++j) {
            const double y = lo.y() + (hi.y() - lo.y()) * j / ny;
            candidates.emplace_back(x, y, c.f(x));
          }
        }
        break;
      }
    }
  }
  std::vector<Vec3> out;
  for (const Vec3& q : candidates) {
    if ((q.array() < lo.array()).any() || (q.array() > hi.array()).any()) continue;
    if (std::abs(oracle_sdf(scene, q)) > 1e-6) continue;  // hidden inside another solid
    out.push_back(q);
  }
  return out;
}

std::string scene_to_text(const SceneSpec& scene) {
  std::ostringstream os;
  os.precision(17);
  os << "[scene]\n";
  for (const auto& p : scene.primitives) {
    switch (p.kind) {
      case PrimitiveKind::kSphere:
        os << "shape = sphere " << p.center.x() << ' ' << p.center.y() << ' ' << p.center.z() << ' '
           << p.radius << '\n';
        break;
      case PrimitiveKind::kBox:
        os << "shape = box " << p.center.x() << ' ' << p.center.y() << ' ' << p.center.z() << ' '
           << p.half_extents.x() << ' ' << p.half_extents.y() << ' ' << p.half_extents.z() << '\n';
        break;
      case PrimitiveKind::kSineGround:
        os << "shape = sine " << p.center.z() << ' ' << p.amplitude << ' ' << p.wavelength << '\n';
        break;
    }
  }
  const char* pattern = scene.pattern == RayPattern::kTarget  ? "target"
                        : scene.pattern == RayPattern::kLidar ? "lidar"
                                                              : "sphere";
  os << "rays = " << scene.rays_per_scan << '\n'
     << "pattern = " << pattern << '\n'
     << "noise = " << scene.range_noise_sigma << '\n'
     << "max_range = " << scene.max_range << '\n'
     << "lidar_beams = " << scene.lidar_beams << '\n'
     << "lidar_elev_min = " << scene.lidar_elev_min_deg << '\n'
     << "lidar_elev_max = " << scene.lidar_elev_max_deg << '\n';
  for (const Vec3& o : scene.trajectory) os << "origin = " << o.x() << ' ' << o.y() << ' ' << o.z() << '\n';
  return os.str();
}

SceneSpec scene_from_text(const std::string& text) {
  SceneSpec scene;
  std::istringstream in(text);
  std::string raw;
  while (std::getline(in, raw)) {
    std::string line = raw.substr(0, raw.find('#'));
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '[') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("scene: expected key = value in '" + raw + "'");
    std::string key = line.substr(0, eq);
    key.erase(key.find_last_not_of(" \t") + 1);
    key.erase(0, key.find_first_not_of(" \t"));
    std::istringstream value(line.substr(eq + 1));
    if (key == "shape") {
      std::string kind;
      value >> kind;
      if (kind == "sphere") {
        auto v = parse_numbers(value, 4, raw);
        scene.primitives.push_back(Primitive::sphere(Vec3(v[0], v[1], v[2]), v[3]));
      } else if (kind == "box") {
        auto v = parse_numbers(value, 6, raw);
        scene.primitives.push_back(Primitive::box(Vec3(v[0], v[1], v[2]), Vec3(v[3], v[4], v[5])));
      } else if (kind == "sine") {
        auto v = parse_numbers(value, 3, raw);
        scene.primitives.push_back(Primitive::sine_ground(v[0], v[1], v[2]));
      } else {
        throw ConfigError("scene: unknown primitive '" + kind + "'");
      }
    } else if (key == "origin") {
      auto v = parse_numbers(value, 3, raw);
      scene.trajectory.emplace_back(v[0], v[1], v[2]);
    } else if (key == "pattern") {
      std::string p;
      value >> p;
      if (p == "target") scene.pattern = RayPattern::kTarget;
      else if (p == "lidar") scene.pattern = RayPattern::kLidar;
      else if (p == "sphere") scene.pattern = RayPattern::kSphere;
      else throw ConfigError("scene: unknown ray pattern '" + p + "'");
    } else {
      auto v = parse_numbers(value, 1, raw);
      if (key == "rays") scene.rays_per_scan = static_cast<int>(v[0]);
      else if (key == "noise") scene.range_noise_sigma = v[0];
      else if (key == "max_range") scene.max_range = v[0];
      else if (key == "lidar_beams") scene.lidar_beams = static_cast<int>(v[0]);
      else if (key == "lidar_elev_min") scene.lidar_elev_min_deg = v[0];
      else if (key == "lidar_elev_max") scene.lidar_elev_max_deg = v[0];
      else throw ConfigError("scene: unknown key '" + key + "'");
    }
  }
  scene.validate();
  return scene;
}

SceneSpec read_scene_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("scene: cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return scene_from_text(ss.str());
}

}  // namespace n3map
