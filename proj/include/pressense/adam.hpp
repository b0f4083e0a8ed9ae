#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "pressense/error.hpp"

namespace pressense {

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction. Moments are kept per parameter array so they line
/// up with a model's named parameters.
struct AdamState {
  AdamHyper hyper;
  std::int64_t step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;

  AdamState() = default;
  explicit AdamState(AdamHyper h) : hyper(h) {}

  /// Lazily sizes the moments to match `shapes`.
  void ensure_shapes(std::span<const std::size_t> sizes) {
    if (m.size() == sizes.size()) {
      for (std::size_t i = 0; i < sizes.size(); ++i)
        if (m[i].size() != sizes[i] || v[i].size() != sizes[i])
          throw InvalidArgument("Adam moments do not match parameter shapes");
      return;
    }
    if (!m.empty()) throw InvalidArgument("Adam moments do not match parameter count");
    for (std::size_t s : sizes) {
      m.emplace_back(s, 0.0);
      v.emplace_back(s, 0.0);
    }
  }

  /// One bias-corrected update of `param` (array `slot`) given its gradient.
  /// Call begin_step() once before updating the arrays of a step.
  void update(std::size_t slot, std::span<double> param, std::span<const double> grad) {
    if (param.size() != grad.size() || slot >= m.size() || m[slot].size() != param.size())
      throw InvalidArgument("Adam update shape mismatch");
    const double c1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(step));
    auto& mm = m[slot];
    auto& vv = v[slot];
    for (std::size_t i = 0; i < param.size(); ++i) {
      mm[i] = hyper.beta1 * mm[i] + (1.0 - hyper.beta1) * grad[i];
      vv[i] = hyper.beta2 * vv[i] + (1.0 - hyper.beta2) * grad[i] * grad[i];
      const double mhat = mm[i] / c1;
      const double vhat = vv[i] / c2;
      param[i] -= hyper.lr * mhat / (std::sqrt(vhat) + hyper.eps);
    }
  }

  void begin_step() { ++step; }
};

}  // namespace pressense
