#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "smad/model.hpp"
#include "smad/random.hpp"

namespace smad::testing {

/// Small double-precision instance for central-difference checks (D <= 8, C <= 5, N <= 4).
struct GradInstance {
  Model<double> model;
  Batch<double> batch;
};

inline nn::BackboneConfig tiny_backbone(int feature_dim) {
  nn::BackboneConfig c;
  c.input_height = 8;
  c.input_width = 8;
  c.channels = {3, 4};
  c.feature_dim = feature_dim;
  return c;
}

/// Random weights (heads included) and inputs; resampled until no ReLU
/// pre-activation lies within `margin` of its kink.
inline GradInstance random_instance(Variant variant, const LossWeights& w, std::uint64_t seed,
                                    double margin = 1e-3) {
  for (std::uint64_t attempt = 0;; ++attempt) {
    auto rng = Rng::derive({seed, attempt, 0x6C});
    const int d = 2 + static_cast<int>(rng.below(7));
    const int c = 2 + static_cast<int>(rng.below(4));
    const int n = 1 + static_cast<int>(rng.below(4));
    ModelConfig mc;
    mc.variant = variant;
    mc.backbone = tiny_backbone(d);
    mc.num_classes = c;
    mc.weights = w;
    Model<double> model(mc);
    auto& p = model.parameters();
    for (int t = 0; t < p.size(); ++t)
      for (Eigen::Index k = 0; k < p[t].size(); ++k) p[t].data()[k] = 0.5 * rng.normal();
    Batch<double> b;
    b.n = n;
    b.input.resize(3, static_cast<Eigen::Index>(n) * 64);
    for (Eigen::Index k = 0; k < b.input.size(); ++k) b.input.data()[k] = rng.normal();
    for (int i = 0; i < n; ++i) {
      b.first_class.push_back(static_cast<int>(rng.below(c)));
      b.second_class.push_back(static_cast<int>(rng.below(c)));
      b.target.push_back(static_cast<int>(rng.below(2)));
    }
    if (model.min_abs_preactivation(b) >= margin) return {std::move(model), std::move(b)};
  }
}

struct GradReport {
  double max_rel_error = 0;
  std::string worst;
  long checked = 0;
};

/// Compare backward gradients of `total` with a fourth-order central difference
/// on every parameter; the wider stencil keeps roundoff small for tiny gradients.
inline GradReport check_gradients(GradInstance& inst, double h = 1e-4, double floor = 1e-6) {
  auto& params = inst.model.parameters();
  Parameters<double> grads = params.zeros_like();
  inst.model.forward(inst.batch, &grads);
  GradReport r;
  for (int t = 0; t < params.size(); ++t) {
    for (Eigen::Index k = 0; k < params[t].size(); ++k) {
      double& x = params[t].data()[k];
      const double x0 = x;
      const auto at = [&](double dx) {
        x = x0 + dx;
        return inst.model.forward(inst.batch).total;
      };
      const double numeric = (8 * (at(h) - at(-h)) - (at(2 * h) - at(-2 * h))) / (12 * h);
      x = x0;
      const double analytic = grads[t].data()[k];
      const double rel = std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
      ++r.checked;
      if (rel > r.max_rel_error) {
        r.max_rel_error = rel;
        r.worst = params.name(t) + "[" + std::to_string(k) + "] analytic=" + std::to_string(analytic) +
                  " numeric=" + std::to_string(numeric);
      }
    }
  }
  return r;
}

}  // namespace smad::testing
