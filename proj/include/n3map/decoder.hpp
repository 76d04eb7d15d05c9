#pragma once

#include <Eigen/Core>

#include "n3map/feature_grid.hpp"
#include "n3map/sampling.hpp"

namespace n3map {

inline constexpr int kHiddenWidth = 32;

// Shallow MLP: feature(8) -> 32 -> ReLU -> 32 -> ReLU -> 1 (linear).
// Parameters live in one flat vector so optimizer state, gradients and
// serialization all share the same layout.
class MlpDecoder {
 public:
  using Hidden = Eigen::Matrix<double, kHiddenWidth, 1>;
  using W1 = Eigen::Matrix<double, kHiddenWidth, kFeatureDim>;
  using W2 = Eigen::Matrix<double, kHiddenWidth, kHiddenWidth>;

  static constexpr Eigen::Index kW1 = 0;
  static constexpr Eigen::Index kB1 = kW1 + kHiddenWidth * kFeatureDim;
  static constexpr Eigen::Index kW2 = kB1 + kHiddenWidth;
  static constexpr Eigen::Index kB2 = kW2 + kHiddenWidth * kHiddenWidth;
  static constexpr Eigen::Index kW3 = kB2 + kHiddenWidth;
  static constexpr Eigen::Index kB3 = kW3 + kHiddenWidth;
  static constexpr Eigen::Index kParamCount = kB3 + 1;

  struct Activations {
    Feature input;
    Hidden z1, a1, z2, a2;
    double output = 0.0;
  };

  MlpDecoder();

  // Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for every weight and bias.
  void initialize(Rng& rng);

  double forward(const Feature& input, Activations* act = nullptr) const;
  // Accumulates d(output)/d(params) * upstream into grad (skipped when null)
  // and returns d(output)/d(input) * upstream.
  Feature backward(const Activations& act, double upstream, Eigen::VectorXd* grad) const;

  [[nodiscard]] Eigen::VectorXd& params() { return params_; }
  [[nodiscard]] const Eigen::VectorXd& params() const { return params_; }

  void freeze() { frozen_ = true; }
  [[nodiscard]] bool frozen() const { return frozen_; }
  void set_frozen(bool f) { frozen_ = f; }

 private:
  Eigen::VectorXd params_;
  bool frozen_ = false;
};

}  // namespace n3map
