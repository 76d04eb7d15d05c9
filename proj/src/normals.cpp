#include "n3map/normals.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace n3map {
namespace {

constexpr double kDegenerateEigenvalue = 1e-12;

bool lex_less(const Vec3& a, const Vec3& b) {
  for (int i = 0; i < 3; ++i) {
    if (a[i] < b[i]) return true;
    if (a[i] > b[i]) return false;
  }
  return false;
}

}  // namespace

SymmetricEigen3 symmetric_eigen3(const Mat3& m) {
  Mat3 a = 0.5 * (m + m.transpose());
  Mat3 v = Mat3::Identity();
  for (int sweep = 0; sweep < 64; ++sweep) {
    const double off = a(0, 1) * a(0, 1) + a(0, 2) * a(0, 2) + a(1, 2) * a(1, 2);
    const double scale = a.diagonal().squaredNorm();
    if (off == 0.0 || off <= 1e-32 * scale) break;
    for (int p = 0; p < 2; ++p) {
      for (int q = p + 1; q < 3; ++q) {
        if (a(p, q) == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        Mat3 rot = Mat3::Identity();
        rot(p, p) = c;
        rot(q, q) = c;
        rot(p, q) = s;
        rot(q, p) = -s;
        a = rot.transpose() * a * rot;
        a(p, q) = a(q, p) = 0.0;
        v = v * rot;
      }
    }
  }
  std::array<int, 3> idx{0, 1, 2};
  std::array<Vec3, 3> cols{v.col(0).normalized(), v.col(1).normalized(), v.col(2).normalized()};
  std::sort(idx.begin(), idx.end(), [&](int i, int j) {
    if (a(i, i) != a(j, j)) return a(i, i) < a(j, j);
    return lex_less(cols[i], cols[j]);
  });
  SymmetricEigen3 out;
  for (int k = 0; k < 3; ++k) {
    out.values[k] = a(idx[k], idx[k]);
    out.vectors[k] = cols[idx[k]];
  }
  return out;
}

ScanFrame estimate_normals(const ScanFrame& frame, int k, NormalStats* stats) {
  ScanFrame out = frame;
  const size_t n = frame.size();
  out.normals.assign(n, Vec3::UnitZ());
  out.normal_flags.assign(n, NormalFlag::kInvalid);
  if (n == 0) return out;
  const size_t kk = std::min<size_t>(std::max(k, 1), n);
  NormalStats local;
  if (kk < 3) {
    local.invalid = n;
  } else {
    const KdTree tree(frame.points);
    for (size_t i = 0; i < n; ++i) {
      const auto nbrs = tree.knn(frame.points[i], kk);
      Vec3 mean = Vec3::Zero();
      for (const auto& nb : nbrs) mean += frame.points[nb.index];
      mean /= static_cast<double>(nbrs.size());
      Mat3 cov = Mat3::Zero();
      for (const auto& nb : nbrs) {
        const Vec3 d = frame.points[nb.index] - mean;
        cov += d * d.transpose();
      }
      cov /= static_cast<double>(nbrs.size());
      const SymmetricEigen3 eig = symmetric_eigen3(cov);
      if (eig.values[0] < kDegenerateEigenvalue && eig.values[1] < kDegenerateEigenvalue) {
        ++local.invalid;
        continue;
      }
      out.normals[i] = eig.vectors[0];
      out.normal_flags[i] = NormalFlag::kValid;
    }
  }
  out = orient_normals(out, &local);
  if (stats) *stats = local;
  return out;
}

ScanFrame orient_normals(const ScanFrame& frame, NormalStats* stats) {
  if (!frame.has_normals()) throw std::invalid_argument("orient_normals: frame has no normals");
  ScanFrame out = frame;
  if (out.normal_flags.size() != out.size()) out.normal_flags.assign(out.size(), NormalFlag::kValid);
  for (size_t i = 0; i < out.size(); ++i) {
    if (out.normal_flags[i] == NormalFlag::kInvalid) continue;
    const double dot = out.normals[i].dot(out.sensor_origin - out.points[i]);
    if (dot < 0) {
      out.normals[i] = -out.normals[i];
    } else if (dot == 0) {
      out.normal_flags[i] = NormalFlag::kLowConfidence;
      if (stats) ++stats->low_confidence;
    }
  }
  return out;
}

}  // namespace n3map
