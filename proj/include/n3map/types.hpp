#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <cstdint>
#include <vector>

namespace n3map {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec3i = Eigen::Matrix<int64_t, 3, 1>;

enum class NormalFlag : uint8_t {
  kValid = 0,
  kInvalid = 1,        // degenerate neighbourhood, no near-surface labels
  kLowConfidence = 2,  // normal perpendicular to the viewing ray
};

// One range scan. Points and normals share indexing; `normals` is empty until
// normals are known (read from file, synthesized, or estimated).
struct ScanFrame {
  std::vector<Vec3> points;
  std::vector<Vec3> normals;
  std::vector<NormalFlag> normal_flags;
  Vec3 sensor_origin = Vec3::Zero();
  int frame_index = 0;

  [[nodiscard]] size_t size() const { return points.size(); }
  [[nodiscard]] bool has_normals() const { return !normals.empty(); }
  [[nodiscard]] bool normal_usable(size_t i) const {
    return has_normals() &&
           (normal_flags.empty() || normal_flags[i] != NormalFlag::kInvalid);
  }
};

struct Pose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  [[nodiscard]] Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
};

}  // namespace n3map
