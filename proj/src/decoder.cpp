#include "n3map/decoder.hpp"

#include <cmath>

namespace n3map {

MlpDecoder::MlpDecoder() : params_(Eigen::VectorXd::Zero(kParamCount)) {}

void MlpDecoder::initialize(Rng& rng) {
  auto fill = [&](Eigen::Index begin, Eigen::Index count, int fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (Eigen::Index i = 0; i < count; ++i) params_[begin + i] = u(rng);
  };
  fill(kW1, kB1 - kW1, kFeatureDim);
  fill(kB1, kHiddenWidth, kFeatureDim);
  fill(kW2, kB2 - kW2, kHiddenWidth);
  fill(kB2, kHiddenWidth, kHiddenWidth);
  fill(kW3, kHiddenWidth, kHiddenWidth);
  fill(kB3, 1, kHiddenWidth);
}

double MlpDecoder::forward(const Feature& input, Activations* act) const {
  const Eigen::Map<const W1> w1(params_.data() + kW1);
  const Eigen::Map<const Hidden> b1(params_.data() + kB1);
  const Eigen::Map<const W2> w2(params_.data() + kW2);
  const Eigen::Map<const Hidden> b2(params_.data() + kB2);
  const Eigen::Map<const Hidden> w3(params_.data() + kW3);
  const double b3 = params_[kB3];

  Activations local;
  Activations& a = act ? *act : local;
  a.input = input;
  a.z1.noalias() = w1 * input + b1;
  a.a1 = a.z1.cwiseMax(0.0);
  a.z2.noalias() = w2 * a.a1 + b2;
  a.a2 = a.z2.cwiseMax(0.0);
  a.output = w3.dot(a.a2) + b3;
  return a.output;
}

Feature MlpDecoder::backward(const Activations& a, double upstream, Eigen::VectorXd* grad) const {
  const Eigen::Map<const W1> w1(params_.data() + kW1);
  const Eigen::Map<const W2> w2(params_.data() + kW2);
  const Eigen::Map<const Hidden> w3(params_.data() + kW3);

  const Hidden dz2 = (upstream * w3).cwiseProduct((a.z2.array() > 0.0).cast<double>().matrix());
  const Hidden dz1 = (w2.transpose() * dz2).cwiseProduct((a.z1.array() > 0.0).cast<double>().matrix());
  if (grad) {
    double* g = grad->data();
    Eigen::Map<W1>(g + kW1).noalias() += dz1 * a.input.transpose();
    Eigen::Map<Hidden>(g + kB1) += dz1;
    Eigen::Map<W2>(g + kW2).noalias() += dz2 * a.a1.transpose();
    Eigen::Map<Hidden>(g + kB2) += dz2;
    Eigen::Map<Hidden>(g + kW3) += upstream * a.a2;
    g[kB3] += upstream;
  }
  return w1.transpose() * dz1;
}

}  // namespace n3map
