#include "n3map/implicit_map.hpp"

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

#include "n3map/errors.hpp"

namespace n3map {
namespace {

// Stencil slot layout: 0 = centre, 1 + 2k = +h along axis k, 2 + 2k = -h.
constexpr int kSlots = 7;

Vec3 axis_offset(int axis, double h) {
  Vec3 d = Vec3::Zero();
  d[axis] = h;
  return d;
}

std::string describe(size_t i, const TrainingPair& p) {
  return "pair " + std::to_string(i) + " at (" + std::to_string(p.query.x()) + ", " + std::to_string(p.query.y()) +
         ", " + std::to_string(p.query.z()) + ")";
}

}  // namespace

void Gradients::prepare(size_t feature_count) {
  if (features.size() < feature_count) {
    features.resize(feature_count, Feature::Zero());
    mark_.resize(feature_count, 0);
  }
}

void Gradients::clear() {
  decoder.setZero();
  for (uint32_t i : touched) {
    features[i].setZero();
    mark_[i] = 0;
  }
  touched.clear();
}

void Gradients::add_feature(uint32_t index, const Feature& g) {
  if (!mark_[index]) {
    mark_[index] = 1;
    touched.push_back(index);
  }
  features[index] += g;
}

ImplicitMap::ImplicitMap(const MapConfig& cfg, uint64_t seed)
    : cfg_(cfg), grid_(cfg.leaf_size, cfg.levels), feature_rng_(point_rng(seed, -2, 0)) {
  Rng decoder_rng = point_rng(seed, -1, 0);
  decoder_.initialize(decoder_rng);
}

size_t ImplicitMap::allocate(std::span<const Vec3> points, double radius) {
  return grid_.allocate(points, radius, feature_rng_);
}

std::optional<double> ImplicitMap::try_decode(const Vec3& x) const {
  CornerStencil s;
  if (!grid_.stencil(x, s)) return std::nullopt;
  return decoder_.forward(grid_.interpolate(s));
}

double ImplicitMap::decode_sdf(const Vec3& x) const {
  if (auto v = try_decode(x)) return *v;
  throw OutOfMapError("decode_sdf: query outside allocated map");
}

bool ImplicitMap::try_gradient(const Vec3& x, double h, Vec3& grad) const {
  const auto center = try_decode(x);
  if (!center) return false;
  for (int k = 0; k < 3; ++k) {
    const auto plus = try_decode(x + axis_offset(k, h));
    const auto minus = try_decode(x - axis_offset(k, h));
    if (plus && minus) grad[k] = (*plus - *minus) / (2.0 * h);
    else if (plus) grad[k] = (*plus - *center) / h;
    else if (minus) grad[k] = (*center - *minus) / h;
    else return false;
  }
  return true;
}

Vec3 ImplicitMap::sdf_gradient(const Vec3& x) const { return sdf_gradient(x, cfg_.gradient_step()); }

Vec3 ImplicitMap::sdf_gradient(const Vec3& x, double h) const {
  Vec3 g;
  if (!try_gradient(x, h, g)) throw OutOfMapError("sdf_gradient: stencil outside allocated map");
  return g;
}

LossTerms ImplicitMap::forward_backward(std::span<const TrainingPair> batch, const LossConfig& cfg,
                                        Gradients* grads) const {
  if (batch.empty()) throw std::invalid_argument("forward_backward: empty batch");
  const double h = cfg_.gradient_step();
  const bool with_eikonal = cfg.lambda_e > 0;

  auto eikonal_possible = [&](const Vec3& x) {
    for (int k = 0; k < 3; ++k)
      if (!grid_.contains(x + axis_offset(k, h)) && !grid_.contains(x - axis_offset(k, h))) return false;
    return true;
  };

  size_t n_eikonal = 0;
  if (with_eikonal)
    for (const auto& p : batch)
      if (p.kind == PairKind::kNearSurface && eikonal_possible(p.query)) ++n_eikonal;

  if (grads) grads->prepare(grid_.feature_count());
  Eigen::VectorXd* decoder_grad = (grads && !decoder_.frozen()) ? &grads->decoder : nullptr;
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  const double eik_scale = n_eikonal ? cfg.lambda_e / static_cast<double>(n_eikonal) : 0.0;

  struct Slot {
    CornerStencil stencil;
    MlpDecoder::Activations act;
    double upstream = 0.0;
    bool used = false;
  };
  std::array<Slot, kSlots> slots;

  double sum_bce = 0.0, sum_eik = 0.0;
  for (size_t i = 0; i < batch.size(); ++i) {
    const TrainingPair& pair = batch[i];
    for (auto& s : slots) {
      s.used = false;
      s.upstream = 0.0;
    }
    Slot& c = slots[0];
    if (!grid_.stencil(pair.query, c.stencil)) throw OutOfMapError("forward_backward: " + describe(i, pair) + " is outside the map");
    c.used = true;
    const double f0 = decoder_.forward(grid_.interpolate(c.stencil), &c.act);
    const BceTerm bce = bce_from_sdf(pair.sdf_label, f0, cfg.beta);
    if (!std::isfinite(bce.loss)) throw NumericalError("forward_backward: non-finite loss at " + describe(i, pair));
    sum_bce += bce.loss;
    c.upstream = bce.d_pred * inv_n;

    if (with_eikonal && pair.kind == PairKind::kNearSurface && eikonal_possible(pair.query)) {
      Vec3 g;
      std::array<std::array<double, kSlots>, 3> dg{};  // d g_k / d f_slot
      for (int k = 0; k < 3; ++k) {
        Slot& plus = slots[1 + 2 * k];
        Slot& minus = slots[2 + 2 * k];
        plus.used = grid_.stencil(pair.query + axis_offset(k, h), plus.stencil);
        minus.used = grid_.stencil(pair.query - axis_offset(k, h), minus.stencil);
        const double fp = plus.used ? decoder_.forward(grid_.interpolate(plus.stencil), &plus.act) : 0.0;
        const double fm = minus.used ? decoder_.forward(grid_.interpolate(minus.stencil), &minus.act) : 0.0;
        if (plus.used && minus.used) {
          g[k] = (fp - fm) / (2.0 * h);
          dg[k][1 + 2 * k] = 1.0 / (2.0 * h);
          dg[k][2 + 2 * k] = -1.0 / (2.0 * h);
        } else if (plus.used) {
          g[k] = (fp - f0) / h;
          dg[k][1 + 2 * k] = 1.0 / h;
          dg[k][0] = -1.0 / h;
        } else {
          g[k] = (f0 - fm) / h;
          dg[k][0] = 1.0 / h;
          dg[k][2 + 2 * k] = -1.0 / h;
        }
      }
      const double norm = g.norm();
      const double eik = (norm - 1.0) * (norm - 1.0);
      if (!std::isfinite(eik)) throw NumericalError("forward_backward: non-finite eikonal term at " + describe(i, pair));
      sum_eik += eik;
      if (norm > 0.0) {
        const Vec3 de_dg = 2.0 * (norm - 1.0) / norm * g;
        for (int k = 0; k < 3; ++k)
          for (int s = 0; s < kSlots; ++s) slots[s].upstream += eik_scale * de_dg[k] * dg[k][s];
      }
    }

    if (!grads) continue;
    for (const Slot& s : slots) {
      if (!s.used || s.upstream == 0.0) continue;
      const Feature d_input = decoder_.backward(s.act, s.upstream, decoder_grad);
      for (int j = 0; j < s.stencil.size(); ++j)
        grads->add_feature(s.stencil.index[j], s.stencil.weight[j] * d_input);
    }
  }

  LossTerms terms;
  terms.n_pairs = batch.size();
  terms.n_eikonal = n_eikonal;
  terms.bce = sum_bce * inv_n;
  terms.eikonal = n_eikonal ? sum_eik / static_cast<double>(n_eikonal) : 0.0;
  terms.total = terms.bce + cfg.lambda_e * terms.eikonal;
  if (!std::isfinite(terms.total)) throw NumericalError("forward_backward: non-finite total loss");
  return terms;
}

}  // namespace n3map
