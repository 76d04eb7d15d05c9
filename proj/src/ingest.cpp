#include "n3map/ingest.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iostream>
#include <sstream>

#include "n3map/errors.hpp"
#include "n3map/ply.hpp"

namespace n3map {

ScanFrame read_scan_binary(const std::filesystem::path& path, ReadStats* stats) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("scan: cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() % 16 != 0)
    throw FormatError("scan: " + path.string() + " length " + std::to_string(bytes.size()) +
                      " is not a multiple of 16 bytes");
  ScanFrame frame;
  const size_t records = bytes.size() / 16;
  frame.points.reserve(records);
  size_t rejected = 0;
  for (size_t i = 0; i < records; ++i) {
    float v[4];
    std::memcpy(v, bytes.data() + 16 * i, 16);
    if (!std::isfinite(v[0]) || !std::isfinite(v[1]) || !std::isfinite(v[2])) {
      ++rejected;
      continue;
    }
    frame.points.emplace_back(v[0], v[1], v[2]);
  }
  if (rejected > 0)
    std::cerr << "warning: " << path.string() << ": rejected " << rejected << " non-finite records\n";
  if (stats) stats->rejected_records += rejected;
  return frame;
}

ScanFrame read_ply_cloud(const std::filesystem::path& path) {
  const ply::File file = ply::read(path);
  const ply::Element* vertex = file.find("vertex");
  if (!vertex) throw FormatError("ply: " + path.string() + " has no vertex element");
  const ply::Property* x = vertex->find("x");
  const ply::Property* y = vertex->find("y");
  const ply::Property* z = vertex->find("z");
  if (!x || !y || !z || x->is_list || y->is_list || z->is_list)
    throw FormatError("ply: " + path.string() + " lacks scalar x/y/z properties");
  const ply::Property* nx = vertex->find("nx");
  const ply::Property* ny = vertex->find("ny");
  const ply::Property* nz = vertex->find("nz");
  const bool with_normals = nx && ny && nz && !nx->is_list && !ny->is_list && !nz->is_list;

  ScanFrame frame;
  frame.points.reserve(vertex->count);
  for (size_t i = 0; i < vertex->count; ++i) {
    frame.points.emplace_back(x->scalars[i], y->scalars[i], z->scalars[i]);
    if (!frame.points.back().allFinite()) throw FormatError("ply: non-finite vertex in " + path.string());
  }
  if (with_normals) {
    frame.normals.reserve(vertex->count);
    frame.normal_flags.assign(vertex->count, NormalFlag::kValid);
    for (size_t i = 0; i < vertex->count; ++i) {
      Vec3 n(nx->scalars[i], ny->scalars[i], nz->scalars[i]);
      const double len = n.norm();
      if (len > 0 && std::isfinite(len)) {
        n /= len;
      } else {
        n = Vec3::UnitZ();
        frame.normal_flags[i] = NormalFlag::kInvalid;
      }
      frame.normals.push_back(n);
    }
  }
  return frame;
}

namespace {

ply::Property double_property(const char* name, size_t count) {
  ply::Property p;
  p.name = name;
  p.type = ply::Type::kFloat64;
  p.scalars.reserve(count);
  return p;
}

}  // namespace

void write_ply_cloud(const std::filesystem::path& path, const ScanFrame& frame) {
  ply::Element vertex;
  vertex.name = "vertex";
  vertex.count = frame.size();
  const char* names[] = {"x", "y", "z", "nx", "ny", "nz"};
  const int props = frame.has_normals() ? 6 : 3;
  for (int k = 0; k < props; ++k) vertex.properties.push_back(double_property(names[k], frame.size()));
  for (size_t i = 0; i < frame.size(); ++i) {
    for (int k = 0; k < 3; ++k) vertex.properties[k].scalars.push_back(frame.points[i][k]);
    if (props == 6)
      for (int k = 0; k < 3; ++k) vertex.properties[3 + k].scalars.push_back(frame.normals[i][k]);
  }
  ply::File file;
  file.elements.push_back(std::move(vertex));
  ply::write(path, file);
}

void write_ply_points(const std::filesystem::path& path, const std::vector<Vec3>& points) {
  ScanFrame frame;
  frame.points = points;
  write_ply_cloud(path, frame);
}

Mat3 nearest_rotation(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 u = svd.matrixU();
  const Mat3 v = svd.matrixV();
  if ((u * v.transpose()).determinant() < 0) u.col(2) *= -1.0;
  return u * v.transpose();
}

std::vector<Pose> read_pose_file(const std::filesystem::path& path, ReadStats* stats) {
  std::ifstream in(path);
  if (!in) throw FormatError("poses: cannot open " + path.string());
  std::vector<Pose> poses;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ss(line);
    std::vector<double> v;
    std::string tok;
    while (ss >> tok) {
      try {
        size_t used = 0;
        v.push_back(std::stod(tok, &used));
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::logic_error&) {
        throw FormatError("poses: " + path.string() + " line " + std::to_string(line_no) +
                          ": bad number '" + tok + "'");
      }
    }
    if (v.size() != 12)
      throw FormatError("poses: " + path.string() + " line " + std::to_string(line_no) + ": expected 12 numbers, got " +
                        std::to_string(v.size()));
    Pose pose;
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) pose.rotation(r, c) = v[4 * r + c];
      pose.translation[r] = v[4 * r + 3];
    }
    const double dev = (pose.rotation * pose.rotation.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff();
    const double det_dev = std::abs(pose.rotation.determinant() - 1.0);
    if (dev > 1e-3 || det_dev > 1e-3) {
      std::cerr << "warning: " << path.string() << " line " << line_no
                << ": rotation not orthonormal, projecting to nearest rotation\n";
      if (stats) ++stats->pose_warnings;
    }
    if (dev > 1e-9 || det_dev > 1e-9) pose.rotation = nearest_rotation(pose.rotation);
    poses.push_back(pose);
  }
  return poses;
}

void write_pose_file(const std::filesystem::path& path, const std::vector<Pose>& poses) {
  std::ofstream os(path);
  if (!os) throw FormatError("poses: cannot write " + path.string());
  os.precision(17);
  for (const Pose& p : poses) {
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) os << p.rotation(r, c) << ' ';
      os << p.translation[r] << (r == 2 ? '\n' : ' ');
    }
  }
}

ScanFrame to_world(const ScanFrame& frame, const Pose& pose) {
  ScanFrame out = frame;
  for (Vec3& p : out.points) p = pose.apply(p);
  for (Vec3& n : out.normals) n = pose.rotation * n;
  out.sensor_origin = pose.apply(frame.sensor_origin);
  return out;
}

}  // namespace n3map
