#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "n3map/errors.hpp"
#include "n3map/types.hpp"

namespace n3map {

struct LossConfig {
  double beta = 0.1;      // sigmoid sharpness (metres)
  double lambda_e = 0.1;  // eikonal weight
  double tr = 0.3;

  void validate() const {
    if (!(beta > 0)) throw ConfigError("beta must be positive");
    if (!(lambda_e >= 0)) throw ConfigError("eikonal weight must be non-negative");
    if (!(tr > 0)) throw ConfigError("truncation must be positive");
  }
};

inline constexpr double kOccupancyClamp = 1e-7;

// Occupancy S(s) = 1 / (1 + exp(-s / beta)).
inline double sigmoid_map(double s, double beta) { return 1.0 / (1.0 + std::exp(-s / beta)); }

// -o log(p) - (1 - o) log(1 - p), with p clamped to [1e-7, 1 - 1e-7].
inline double bce_loss(double target, double predicted) {
  const double p = std::clamp(predicted, kOccupancyClamp, 1.0 - kOccupancyClamp);
  return -target * std::log(p) - (1.0 - target) * std::log(1.0 - p);
}

// BCE between S(label) and S(prediction), and its derivative w.r.t. the
// predicted SDF. The derivative is zero where the clamp is active.
struct BceTerm {
  double loss;
  double d_pred;
};

inline BceTerm bce_from_sdf(double label, double pred, double beta) {
  const double o = sigmoid_map(label, beta);
  const double p = sigmoid_map(pred, beta);
  const bool clamped = p < kOccupancyClamp || p > 1.0 - kOccupancyClamp;
  return {bce_loss(o, p), clamped ? 0.0 : (p - o) / beta};
}

// (||g|| - 1)^2
inline double eikonal_loss(const Vec3& grad) {
  const double d = grad.norm() - 1.0;
  return d * d;
}

struct LossTerms {
  double bce = 0.0;      // mean over all pairs
  double eikonal = 0.0;  // mean over near-surface pairs with a valid stencil
  double total = 0.0;    // bce + lambda_e * eikonal
  size_t n_pairs = 0;
  size_t n_eikonal = 0;
};

}  // namespace n3map
