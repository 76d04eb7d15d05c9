#pragma once

#include <filesystem>
#include <vector>

#include "n3map/types.hpp"

namespace n3map {

struct ReadStats {
  size_t rejected_records = 0;  // non-finite scan records skipped
  size_t pose_warnings = 0;     // rotations re-orthonormalized beyond tolerance
};

// KITTI velodyne format: packed little-endian float32 (x, y, z, intensity).
// Intensity is dropped; the frame is in sensor coordinates.
ScanFrame read_scan_binary(const std::filesystem::path& path, ReadStats* stats = nullptr);

// x, y, z required; nx, ny, nz optional (renormalized to unit length).
ScanFrame read_ply_cloud(const std::filesystem::path& path);
// Binary little-endian, double precision; normals written when present.
void write_ply_cloud(const std::filesystem::path& path, const ScanFrame& frame);
void write_ply_points(const std::filesystem::path& path, const std::vector<Vec3>& points);

// One row-major 3x4 [R|t] per non-empty line.
std::vector<Pose> read_pose_file(const std::filesystem::path& path, ReadStats* stats = nullptr);
void write_pose_file(const std::filesystem::path& path, const std::vector<Pose>& poses);

Mat3 nearest_rotation(const Mat3& m);

// p' = R p + t, n' = R n, sensor origin = t.
ScanFrame to_world(const ScanFrame& frame, const Pose& pose);

}  // namespace n3map
