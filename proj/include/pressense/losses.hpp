#pragma once

// Training losses: structure-aware cross-entropy over pressure bins, the masked
// contact-label BCE, and the domain-discriminator loss with its gradient-reversal
// contract. Every loss returns its exact analytic gradient.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pressense/error.hpp"
#include "pressense/grid.hpp"
#include "pressense/pressure.hpp"

namespace pressense {

/// Floor applied to probabilities inside every log.
inline constexpr double kProbEpsilon = 1e-12;

enum class Finger : int { thumb = 0, index = 1, middle = 2, ring = 3, pinky = 4 };
inline constexpr int kFingerCount = 5;
inline constexpr int kContactLabelSize = 6;

enum class ForceLevel : int { unspecified = -1, low = 0, high = 1 };

/// Fully-labeled frames carry measured pressure; weakly-labeled ones only a contact label.
enum class Domain { full, weak };

/// Five per-fingertip contact flags plus a ternary force level.
struct ContactLabel {
  std::array<std::uint8_t, kFingerCount> fingers{};
  ForceLevel force = ForceLevel::unspecified;

  bool finger(Finger f) const noexcept { return fingers[static_cast<int>(f)] != 0; }
  bool any_contact() const noexcept {
    return std::any_of(fingers.begin(), fingers.end(), [](std::uint8_t v) { return v != 0; });
  }
  static ContactLabel no_contact() noexcept { return {}; }

  friend bool operator==(const ContactLabel&, const ContactLabel&) = default;
};

inline ContactLabel make_label(std::array<int, kFingerCount> fingers, int force) {
  if (force < -1 || force > 1) throw InvalidArgument("force level must be -1, 0 or 1");
  ContactLabel label;
  for (int i = 0; i < kFingerCount; ++i) {
    if (fingers[i] != 0 && fingers[i] != 1) throw InvalidArgument("finger flags must be 0 or 1");
    label.fingers[i] = static_cast<std::uint8_t>(fingers[i]);
  }
  label.force = static_cast<ForceLevel>(force);
  return label;
}

struct LossBreakdown {
  double l_p = 0.0;
  double l_w = 0.0;
  double l_d = 0.0;
  double total = 0.0;
  double lambda1 = 0.0;
  double lambda2 = 0.0;
};

enum class PixelReduction { sum, mean };

struct LossWithGrad {
  double loss = 0.0;
  Volume grad;
};

/// Numerically stable in-place softmax over one pixel.
inline void softmax_inplace(std::span<double> v) {
  const double m = *std::max_element(v.begin(), v.end());
  double z = 0.0;
  for (double& x : v) {
    x = std::exp(x - m);
    z += x;
  }
  for (double& x : v) x /= z;
}

inline Volume softmax(const Volume& logits) {
  Volume out = logits;
  for (std::size_t i = 0; i < out.pixels(); ++i) softmax_inplace(out.pixel(i));
  return out;
}

/// Per-bin weights e^{-|b-k|} for target bin k.
inline std::vector<double> structure_weights(int n_bins, int target) {
  std::vector<double> w(static_cast<std::size_t>(n_bins));
  for (int b = 0; b < n_bins; ++b) w[b] = std::exp(-std::abs(b - target));
  return w;
}

/// L_p = -sum_{x,y} sum_b e^{-|b-k|} log max(rho(b), eps), rho = softmax(logits).
///
/// The gradient is taken of the clamped function, so bins whose probability sits
/// below eps contribute nothing.
inline LossWithGrad structure_aware_ce(const Volume& logits, const BinIndexImage& target,
                                       PixelReduction reduction = PixelReduction::sum) {
  if (logits.width != target.width || logits.height != target.height)
    throw InvalidArgument("logits and target differ in spatial shape");
  if (logits.depth < 1) throw InvalidArgument("logits need at least one bin");
  const int n = logits.depth;
  LossWithGrad out{0.0, Volume(logits.width, logits.height, n)};
  std::vector<double> rho(static_cast<std::size_t>(n));
  const double scale = reduction == PixelReduction::mean && logits.pixels() > 0
                           ? 1.0 / static_cast<double>(logits.pixels())
                           : 1.0;
  for (std::size_t i = 0; i < logits.pixels(); ++i) {
    auto z = logits.pixel(i);
    for (double v : z)
      if (!std::isfinite(v)) throw InvalidArgument("logits must be finite");
    const int k = target.data[i];
    if (k < 0 || k >= n) throw InvalidArgument("target bin out of range");
    std::copy(z.begin(), z.end(), rho.begin());
    softmax_inplace(rho);
    double loss = 0.0;
    double active_weight = 0.0;
    for (int b = 0; b < n; ++b) {
      const double w = std::exp(-std::abs(b - k));
      if (rho[b] > kProbEpsilon) {
        loss -= w * std::log(rho[b]);
        active_weight += w;
      } else {
        loss -= w * std::log(kProbEpsilon);
      }
    }
    auto g = out.grad.pixel(i);
    for (int c = 0; c < n; ++c) {
      const double own = rho[c] > kProbEpsilon ? std::exp(-std::abs(c - k)) : 0.0;
      g[c] = scale * (rho[c] * active_weight - own);
    }
    out.loss += loss;
  }
  out.loss *= scale;
  return out;
}

struct ContactLossResult {
  double loss = 0.0;
  std::array<double, kContactLabelSize> grad{};
};

/// Stable -[t log s(z) + (1-t) log(1-s(z))], s the logistic sigmoid.
inline double bce_with_logit(double z, double t) {
  return std::max(z, 0.0) - z * t + std::log1p(std::exp(-std::abs(z)));
}

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

/// Mean BCE over the unmasked contact-label elements. The force element is
/// masked (zero loss, zero gradient) when the label's force is unspecified.
inline ContactLossResult contact_label_loss(std::span<const double> logits, const ContactLabel& label) {
  if (logits.size() != kContactLabelSize) throw InvalidArgument("contact head must emit 6 logits");
  ContactLossResult out;
  std::array<double, kContactLabelSize> target{};
  std::array<bool, kContactLabelSize> active{};
  for (int i = 0; i < kFingerCount; ++i) {
    target[i] = label.fingers[i] ? 1.0 : 0.0;
    active[i] = true;
  }
  active[5] = label.force != ForceLevel::unspecified;
  target[5] = label.force == ForceLevel::high ? 1.0 : 0.0;
  const int count = active[5] ? 6 : 5;
  for (int i = 0; i < kContactLabelSize; ++i) {
    if (!std::isfinite(logits[i])) throw InvalidArgument("contact logits must be finite");
    if (!active[i]) continue;
    out.loss += bce_with_logit(logits[i], target[i]);
    out.grad[i] = (sigmoid(logits[i]) - target[i]) / count;
  }
  out.loss /= count;
  return out;
}

/// Sign-flipped copy of an upstream gradient: the backward pass of the gradient
/// reversal layer (forward is the identity). Scale is fixed at 1.
inline std::vector<double> reverse_gradient(std::span<const double> grad) {
  std::vector<double> out(grad.size());
  std::transform(grad.begin(), grad.end(), out.begin(), [](double g) { return -g; });
  return out;
}

struct DomainLossResult {
  double loss = 0.0;
  /// dL/dD for the fully- and weakly-labeled discriminator outputs.
  double grad_full = 0.0;
  double grad_weak = 0.0;
  /// Gradients the discriminator descends on (unreversed).
  std::array<double, 2> discriminator_grad() const noexcept { return {grad_full, grad_weak}; }
  /// Gradients passed upstream into the encoder (reversed).
  std::array<double, 2> encoder_grad() const noexcept { return {-grad_full, -grad_weak}; }
};

/// L_d = -log D(F_f) - log(1 - D(F_w)), with probabilities clamped below at eps.
inline DomainLossResult domain_loss(double d_full, double d_weak) {
  if (!(d_full >= 0.0 && d_full <= 1.0) || !(d_weak >= 0.0 && d_weak <= 1.0))
    throw InvalidArgument("discriminator outputs must be probabilities");
  DomainLossResult out;
  const double pf = std::max(d_full, kProbEpsilon);
  const double pw = std::max(1.0 - d_weak, kProbEpsilon);
  out.loss = -std::log(pf) - std::log(pw);
  out.grad_full = d_full > kProbEpsilon ? -1.0 / d_full : 0.0;
  out.grad_weak = 1.0 - d_weak > kProbEpsilon ? 1.0 / (1.0 - d_weak) : 0.0;
  return out;
}

/// L = L_p + lambda1 L_w + lambda2 L_d. Weakly-labeled batches carry no L_p.
inline LossBreakdown combined_loss(double l_p, double l_w, double l_d, double lambda1, double lambda2,
                                   bool has_full_labels = true) {
  if (!std::isfinite(l_p) || !std::isfinite(l_w) || !std::isfinite(l_d))
    throw InvalidArgument("loss components must be finite");
  LossBreakdown out;
  out.l_p = has_full_labels ? l_p : 0.0;
  out.l_w = l_w;
  out.l_d = l_d;
  out.lambda1 = lambda1;
  out.lambda2 = lambda2;
  out.total = out.l_p + lambda1 * l_w + lambda2 * l_d;
  return out;
}

}  // namespace pressense
