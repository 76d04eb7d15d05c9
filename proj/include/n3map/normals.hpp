#pragma once

#include <array>

#include "n3map/kdtree.hpp"
#include "n3map/types.hpp"

namespace n3map {

struct SymmetricEigen3 {
  std::array<double, 3> values;  // ascending
  std::array<Vec3, 3> vectors;   // unit, matching `values`
};

// Cyclic Jacobi eigen-decomposition of a symmetric 3x3 matrix. Exact ties are
// ordered by the lexicographically smaller eigenvector.
SymmetricEigen3 symmetric_eigen3(const Mat3& m);

struct NormalStats {
  size_t invalid = 0;
  size_t low_confidence = 0;
};

// PCA normals over the k nearest neighbours (the point itself included),
// followed by orient_normals. k is clamped to the point count; neighbourhoods
// of fewer than 3 points or with two vanishing eigenvalues are flagged invalid.
ScanFrame estimate_normals(const ScanFrame& frame, int k = 20, NormalStats* stats = nullptr);

// Flips normals to face the sensor: n . (origin - p) > 0. Exactly perpendicular
// normals are left as they are and flagged low-confidence.
ScanFrame orient_normals(const ScanFrame& frame, NormalStats* stats = nullptr);

}  // namespace n3map
