#pragma once

// Desk-scale encoder/decoder with two pooled heads.
//
//   input (W x H x C)
//     -> enc1: 2x2 stride-2 conv, tanh        (W/2 x H/2 x hidden)
//     -> enc2: 2x2 stride-2 conv, tanh        (W/4 x H/4 x hidden)   bottleneck
//   bottleneck -> x4 nearest upsample -> per-pixel linear   pressure logits (W x H x n_bins)
//   bottleneck -> spatial mean F
//     F -> tanh MLP -> 6 contact logits
//     F -> [gradient reversal] -> tanh MLP -> 1 domain logit
//
// Backpropagation is written out by hand; gradient_check() compares it against
// central finite differences.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "pressense/adam.hpp"
#include "pressense/error.hpp"
#include "pressense/grid.hpp"
#include "pressense/losses.hpp"
#include "pressense/pressure.hpp"

namespace pressense {

struct ModelConfig {
  int width = 16;
  int height = 16;
  int channels = 3;
  int hidden_channels = 8;
  int n_bins = 9;
  std::uint64_t seed = 0;

  void validate() const {
    if (width < 1 || height < 1 || channels < 1 || hidden_channels < 1 || n_bins < 1)
      throw InvalidArgument("model dimensions must be >= 1");
    if (width % 4 != 0 || height % 4 != 0)
      throw InvalidArgument("model input width and height must be multiples of 4");
  }
  int bottleneck_width() const noexcept { return width / 4; }
  int bottleneck_height() const noexcept { return height / 4; }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct ParamArray {
  std::string name;
  std::vector<int> shape;
  std::vector<double> values;
};

/// Slots into ModelParams::arrays; the order is also the checkpoint order.
enum Slot : std::size_t {
  kEnc1W, kEnc1B, kEnc2W, kEnc2B,
  kPresW, kPresB,
  kContact1W, kContact1B, kContact2W, kContact2B,
  kDisc1W, kDisc1B, kDisc2W, kDisc2B,
  kSlotCount
};

struct ModelParams {
  ModelConfig config;
  std::vector<ParamArray> arrays;

  std::span<const double> operator[](Slot s) const { return arrays[s].values; }
  std::span<double> operator[](Slot s) { return arrays[s].values; }

  std::size_t parameter_count() const noexcept {
    std::size_t n = 0;
    for (const auto& a : arrays) n += a.values.size();
    return n;
  }
  std::vector<std::size_t> sizes() const {
    std::vector<std::size_t> s;
    for (const auto& a : arrays) s.push_back(a.values.size());
    return s;
  }

  static bool is_encoder(Slot s) noexcept { return s <= kEnc2B; }
  static bool is_pressure_head(Slot s) noexcept { return s == kPresW || s == kPresB; }
  static bool is_discriminator(Slot s) noexcept { return s >= kDisc1W; }

  friend bool operator==(const ModelParams& a, const ModelParams& b) {
    if (!(a.config == b.config) || a.arrays.size() != b.arrays.size()) return false;
    for (std::size_t i = 0; i < a.arrays.size(); ++i)
      if (a.arrays[i].name != b.arrays[i].name || a.arrays[i].shape != b.arrays[i].shape ||
          a.arrays[i].values != b.arrays[i].values)
        return false;
    return true;
  }
};

/// Gradients laid out like ModelParams::arrays.
using ParamGrads = std::vector<std::vector<double>>;

inline ModelParams init_model(const ModelConfig& config) {
  config.validate();
  const int c = config.channels, h = config.hidden_channels, b = config.n_bins;
  ModelParams p{config, {}};
  auto add = [&](std::string name, std::vector<int> shape) {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    p.arrays.push_back({std::move(name), std::move(shape), std::vector<double>(n, 0.0)});
  };
  add("enc1.weight", {h, 2, 2, c});
  add("enc1.bias", {h});
  add("enc2.weight", {h, 2, 2, h});
  add("enc2.bias", {h});
  add("pressure.weight", {b, h});
  add("pressure.bias", {b});
  add("contact1.weight", {h, h});
  add("contact1.bias", {h});
  add("contact2.weight", {kContactLabelSize, h});
  add("contact2.bias", {kContactLabelSize});
  add("disc1.weight", {h, h});
  add("disc1.bias", {h});
  add("disc2.weight", {1, h});
  add("disc2.bias", {1});

  std::mt19937_64 rng(config.seed);
  // Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)); biases start at zero.
  for (auto& a : p.arrays) {
    if (a.shape.size() < 2) continue;
    std::size_t fan_in = a.values.size() / static_cast<std::size_t>(a.shape[0]);
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& v : a.values) v = dist(rng);
  }
  return p;
}

struct ForwardResult {
  Volume h1;
  Volume h2;
  Volume pressure_logits;
  std::vector<double> pooled;
  std::vector<double> contact_hidden;
  std::array<double, kContactLabelSize> contact_logits{};
  std::vector<double> disc_hidden;
  double domain_logit = 0.0;
};

namespace detail {

/// 2x2 stride-2 convolution with bias and tanh.
inline Volume conv2x2_tanh(const Volume& in, std::span<const double> w, std::span<const double> bias,
                           int out_channels) {
  const int ow = in.width / 2, oh = in.height / 2, ic = in.depth;
  Volume out(ow, oh, out_channels);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x)
      for (int o = 0; o < out_channels; ++o) {
        double acc = bias[o];
        for (int dy = 0; dy < 2; ++dy)
          for (int dx = 0; dx < 2; ++dx) {
            const double* src = in.data.data() + in.offset(2 * x + dx, 2 * y + dy);
            const double* wk = w.data() + ((static_cast<std::size_t>(o) * 2 + dy) * 2 + dx) * ic;
            for (int c = 0; c < ic; ++c) acc += wk[c] * src[c];
          }
        out.at(x, y, o) = std::tanh(acc);
      }
  return out;
}

/// Backward of conv2x2_tanh given dL/d(out) (post-tanh). Accumulates into
/// weight/bias grads; returns dL/d(in) when `want_input_grad`.
inline Volume conv2x2_tanh_backward(const Volume& in, const Volume& out, const Volume& dout,
                                    std::span<const double> w, std::span<double> gw,
                                    std::span<double> gb, bool want_input_grad) {
  const int ic = in.depth, oc = out.depth;
  Volume din;
  if (want_input_grad) din = Volume(in.width, in.height, ic);
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x)
      for (int o = 0; o < oc; ++o) {
        const double a = out.at(x, y, o);
        const double da = dout.at(x, y, o) * (1.0 - a * a);
        gb[o] += da;
        for (int dy = 0; dy < 2; ++dy)
          for (int dx = 0; dx < 2; ++dx) {
            const std::size_t woff = ((static_cast<std::size_t>(o) * 2 + dy) * 2 + dx) * ic;
            const double* src = in.data.data() + in.offset(2 * x + dx, 2 * y + dy);
            for (int c = 0; c < ic; ++c) gw[woff + c] += da * src[c];
            if (want_input_grad) {
              double* dst = din.data.data() + din.offset(2 * x + dx, 2 * y + dy);
              for (int c = 0; c < ic; ++c) dst[c] += da * w[woff + c];
            }
          }
      }
  return din;
}

/// tanh(W x + b) for a dense layer with W of shape (out, in).
inline std::vector<double> dense_tanh(std::span<const double> w, std::span<const double> b,
                                      std::span<const double> x) {
  std::vector<double> y(b.size());
  for (std::size_t o = 0; o < b.size(); ++o) {
    double acc = b[o];
    for (std::size_t i = 0; i < x.size(); ++i) acc += w[o * x.size() + i] * x[i];
    y[o] = std::tanh(acc);
  }
  return y;
}

inline std::vector<double> dense(std::span<const double> w, std::span<const double> b,
                                 std::span<const double> x) {
  std::vector<double> y(b.size());
  for (std::size_t o = 0; o < b.size(); ++o) {
    double acc = b[o];
    for (std::size_t i = 0; i < x.size(); ++i) acc += w[o * x.size() + i] * x[i];
    y[o] = acc;
  }
  return y;
}

/// Backward through y = W x + b (linear). Accumulates grads, returns dL/dx.
inline std::vector<double> dense_backward(std::span<const double> w, std::span<const double> x,
                                          std::span<const double> dy, std::span<double> gw,
                                          std::span<double> gb) {
  std::vector<double> dx(x.size(), 0.0);
  for (std::size_t o = 0; o < dy.size(); ++o) {
    gb[o] += dy[o];
    for (std::size_t i = 0; i < x.size(); ++i) {
      gw[o * x.size() + i] += dy[o] * x[i];
      dx[i] += dy[o] * w[o * x.size() + i];
    }
  }
  return dx;
}

}  // namespace detail

inline ForwardResult forward(const ModelParams& params, const Volume& input) {
  const ModelConfig& cfg = params.config;
  if (input.width != cfg.width || input.height != cfg.height || input.depth != cfg.channels)
    throw InvalidArgument("input " + std::to_string(input.width) + "x" + std::to_string(input.height) + "x" +
                          std::to_string(input.depth) + " does not match model config");
  const int h = cfg.hidden_channels, nb = cfg.n_bins;
  ForwardResult r;
  r.h1 = detail::conv2x2_tanh(input, params[kEnc1W], params[kEnc1B], h);
  r.h2 = detail::conv2x2_tanh(r.h1, params[kEnc2W], params[kEnc2B], h);

  r.pressure_logits = Volume(cfg.width, cfg.height, nb);
  auto pw = params[kPresW];
  auto pb = params[kPresB];
  std::vector<double> cell(static_cast<std::size_t>(nb));
  for (int y2 = 0; y2 < r.h2.height; ++y2)
    for (int x2 = 0; x2 < r.h2.width; ++x2) {
      for (int b = 0; b < nb; ++b) {
        double acc = pb[b];
        for (int o = 0; o < h; ++o) acc += pw[static_cast<std::size_t>(b) * h + o] * r.h2.at(x2, y2, o);
        cell[b] = acc;
      }
      for (int dy = 0; dy < 4; ++dy)
        for (int dx = 0; dx < 4; ++dx)
          std::copy(cell.begin(), cell.end(),
                    r.pressure_logits.pixel(static_cast<std::size_t>(4 * y2 + dy) * cfg.width + 4 * x2 + dx).begin());
    }

  r.pooled.assign(static_cast<std::size_t>(h), 0.0);
  for (std::size_t i = 0; i < r.h2.pixels(); ++i) {
    auto px = r.h2.pixel(i);
    for (int o = 0; o < h; ++o) r.pooled[o] += px[o];
  }
  for (double& v : r.pooled) v /= static_cast<double>(r.h2.pixels());

  r.contact_hidden = detail::dense_tanh(params[kContact1W], params[kContact1B], r.pooled);
  auto cl = detail::dense(params[kContact2W], params[kContact2B], r.contact_hidden);
  std::copy(cl.begin(), cl.end(), r.contact_logits.begin());
  r.disc_hidden = detail::dense_tanh(params[kDisc1W], params[kDisc1B], r.pooled);
  r.domain_logit = detail::dense(params[kDisc2W], params[kDisc2B], r.disc_hidden)[0];
  return r;
}

inline bool is_finite(const ForwardResult& r) {
  auto ok = [](double v) { return std::isfinite(v); };
  return std::all_of(r.pressure_logits.data.begin(), r.pressure_logits.data.end(), ok) &&
         std::all_of(r.contact_logits.begin(), r.contact_logits.end(), ok) && ok(r.domain_logit);
}

/// Upstream gradients for one sample's forward pass.
struct HeadGrads {
  std::optional<Volume> pressure_logits;
  std::array<double, kContactLabelSize> contact_logits{};
  double domain_logit = 0.0;
};

inline ParamGrads zero_grads(const ModelParams& params) {
  ParamGrads g;
  for (const auto& a : params.arrays) g.emplace_back(a.values.size(), 0.0);
  return g;
}

/// Backpropagates one sample's head gradients into `grads`. With
/// `reverse_domain`, the discriminator's gradient w.r.t. the pooled features is
/// negated before it enters the encoder; discriminator weights are unaffected.
inline void backward(const ModelParams& params, const Volume& input, const ForwardResult& fw,
                     const HeadGrads& up, bool reverse_domain, ParamGrads& grads) {
  const ModelConfig& cfg = params.config;
  const int h = cfg.hidden_channels, nb = cfg.n_bins;

  std::vector<double> dpooled(static_cast<std::size_t>(h), 0.0);

  // Contact head.
  {
    std::span<const double> dlog(up.contact_logits);
    auto dhid = detail::dense_backward(params[kContact2W], fw.contact_hidden, dlog, grads[kContact2W],
                                       grads[kContact2B]);
    for (std::size_t i = 0; i < dhid.size(); ++i)
      dhid[i] *= 1.0 - fw.contact_hidden[i] * fw.contact_hidden[i];
    auto dp = detail::dense_backward(params[kContact1W], fw.pooled, dhid, grads[kContact1W], grads[kContact1B]);
    for (int o = 0; o < h; ++o) dpooled[o] += dp[o];
  }

  // Discriminator head, behind the gradient reversal layer.
  if (up.domain_logit != 0.0) {
    std::array<double, 1> dz{up.domain_logit};
    auto dhid = detail::dense_backward(params[kDisc2W], fw.disc_hidden, dz, grads[kDisc2W], grads[kDisc2B]);
    for (std::size_t i = 0; i < dhid.size(); ++i) dhid[i] *= 1.0 - fw.disc_hidden[i] * fw.disc_hidden[i];
    auto dp = detail::dense_backward(params[kDisc1W], fw.pooled, dhid, grads[kDisc1W], grads[kDisc1B]);
    if (reverse_domain) dp = reverse_gradient(dp);
    for (int o = 0; o < h; ++o) dpooled[o] += dp[o];
  }

  // Bottleneck gradient: mean pooling plus the upsampled pressure head.
  Volume dh2(fw.h2.width, fw.h2.height, h);
  const double inv_cells = 1.0 / static_cast<double>(fw.h2.pixels());
  for (std::size_t i = 0; i < dh2.pixels(); ++i) {
    auto px = dh2.pixel(i);
    for (int o = 0; o < h; ++o) px[o] = dpooled[o] * inv_cells;
  }
  if (up.pressure_logits) {
    const Volume& dl = *up.pressure_logits;
    if (dl.width != cfg.width || dl.height != cfg.height || dl.depth != nb)
      throw InvalidArgument("pressure gradient shape mismatch");
    auto pw = params[kPresW];
    auto& gw = grads[kPresW];
    auto& gb = grads[kPresB];
    std::vector<double> dcell(static_cast<std::size_t>(nb));
    for (int y2 = 0; y2 < fw.h2.height; ++y2)
      for (int x2 = 0; x2 < fw.h2.width; ++x2) {
        std::fill(dcell.begin(), dcell.end(), 0.0);
        for (int dy = 0; dy < 4; ++dy)
          for (int dx = 0; dx < 4; ++dx) {
            const double* g = dl.data.data() + dl.offset(4 * x2 + dx, 4 * y2 + dy);
            for (int b = 0; b < nb; ++b) dcell[b] += g[b];
          }
        for (int b = 0; b < nb; ++b) {
          gb[b] += dcell[b];
          for (int o = 0; o < h; ++o) {
            gw[static_cast<std::size_t>(b) * h + o] += dcell[b] * fw.h2.at(x2, y2, o);
            dh2.at(x2, y2, o) += dcell[b] * pw[static_cast<std::size_t>(b) * h + o];
          }
        }
      }
  }

  Volume dh1 = detail::conv2x2_tanh_backward(fw.h1, fw.h2, dh2, params[kEnc2W], grads[kEnc2W], grads[kEnc2B], true);
  detail::conv2x2_tanh_backward(input, fw.h1, dh1, params[kEnc1W], grads[kEnc1W], grads[kEnc1B], false);
}

/// One training example. `target` is meaningful only for the full domain.
struct TrainSample {
  Volume features;
  Domain domain = Domain::full;
  ContactLabel label;
  BinIndexImage target;
};

struct LossConfig {
  double lambda1 = 0.01;
  double lambda2 = 0.001;
  bool use_contact_loss = true;
  bool use_domain_loss = true;
  PixelReduction pixel_reduction = PixelReduction::sum;
};

struct GradientResult {
  LossBreakdown losses;
  ParamGrads grads;
};

/// Combined loss over a batch and its gradient.
///
/// L_p is averaged over the batch's full samples, L_w over all samples, and L_d is
/// mean_full[-log D] + mean_weak[-log(1-D)] (each term present only when that
/// domain is in the batch). With `reverse_domain` the encoder receives the
/// reversed L_d gradient, which is what training uses; without it the result is
/// the true gradient of the combined loss.
inline GradientResult compute_gradients(const ModelParams& params, std::span<const TrainSample> batch,
                                        const LossConfig& cfg, bool reverse_domain) {
  if (batch.empty()) throw InvalidArgument("empty batch");
  std::size_t n_full = 0, n_weak = 0;
  for (const auto& s : batch) (s.domain == Domain::full ? n_full : n_weak)++;

  GradientResult out{{}, zero_grads(params)};
  double l_p = 0.0, l_w = 0.0, l_d = 0.0;
  const bool use_w = cfg.use_contact_loss && cfg.lambda1 != 0.0;
  const bool use_d = cfg.use_domain_loss && cfg.lambda2 != 0.0;
  for (const auto& s : batch) {
    ForwardResult fw = forward(params, s.features);
    if (!is_finite(fw)) throw TrainingDiverged("model outputs are not finite");
    HeadGrads up;
    if (s.domain == Domain::full) {
      auto ce = structure_aware_ce(fw.pressure_logits, s.target, cfg.pixel_reduction);
      l_p += ce.loss / static_cast<double>(n_full);
      for (double& g : ce.grad.data) g /= static_cast<double>(n_full);
      up.pressure_logits = std::move(ce.grad);
    }
    if (use_w) {
      auto cl = contact_label_loss(fw.contact_logits, s.label);
      l_w += cl.loss / static_cast<double>(batch.size());
      for (int i = 0; i < kContactLabelSize; ++i)
        up.contact_logits[i] = cfg.lambda1 * cl.grad[i] / static_cast<double>(batch.size());
    }
    if (use_d) {
      const double t = s.domain == Domain::full ? 1.0 : 0.0;
      const double count = static_cast<double>(s.domain == Domain::full ? n_full : n_weak);
      l_d += bce_with_logit(fw.domain_logit, t) / count;
      up.domain_logit = cfg.lambda2 * (sigmoid(fw.domain_logit) - t) / count;
    }
    backward(params, s.features, fw, up, reverse_domain, out.grads);
  }
  out.losses = combined_loss(l_p, use_w ? l_w : 0.0, use_d ? l_d : 0.0, cfg.lambda1, cfg.lambda2, n_full > 0);
  if (!std::isfinite(out.losses.total)) throw TrainingDiverged("combined loss is not finite");
  return out;
}

/// Gradient of L_d alone with respect to the encoder parameters, with or without
/// the reversal layer. Used to verify the reversal contract.
inline ParamGrads domain_encoder_gradient(const ModelParams& params, std::span<const TrainSample> batch,
                                          bool reverse_domain) {
  std::size_t n_full = 0, n_weak = 0;
  for (const auto& s : batch) (s.domain == Domain::full ? n_full : n_weak)++;
  ParamGrads grads = zero_grads(params);
  for (const auto& s : batch) {
    ForwardResult fw = forward(params, s.features);
    HeadGrads up;
    const double t = s.domain == Domain::full ? 1.0 : 0.0;
    const double count = static_cast<double>(s.domain == Domain::full ? n_full : n_weak);
    up.domain_logit = (sigmoid(fw.domain_logit) - t) / count;
    backward(params, s.features, fw, up, reverse_domain, grads);
  }
  for (std::size_t s = 0; s < grads.size(); ++s)
    if (!ModelParams::is_encoder(static_cast<Slot>(s))) grads[s].clear();
  return grads;
}

/// Combined-loss value only (no gradients).
inline double total_loss(const ModelParams& params, std::span<const TrainSample> batch, const LossConfig& cfg) {
  return compute_gradients(params, batch, cfg, false).losses.total;
}

/// One Adam step on the combined loss, with the reversed domain gradient in the
/// encoder. Updates `params` and `adam` in place.
inline LossBreakdown backward_and_step(ModelParams& params, AdamState& adam, std::span<const TrainSample> batch,
                                       const LossConfig& cfg) {
  GradientResult g = compute_gradients(params, batch, cfg, true);
  adam.ensure_shapes(params.sizes());
  adam.begin_step();
  for (std::size_t s = 0; s < params.arrays.size(); ++s) adam.update(s, params.arrays[s].values, g.grads[s]);
  for (const auto& a : params.arrays)
    for (double v : a.values)
      if (!std::isfinite(v)) throw TrainingDiverged("parameters became non-finite");
  return g.losses;
}

namespace reference {

/// Scalar-generic evaluation of the combined loss, written independently of
/// forward()/backward() so finite differences can run in extended precision.
/// The parameter at (`slot`, `index`) is offset by `delta` before evaluation.
template <typename T>
T combined_loss_value(const ModelParams& params, std::span<const TrainSample> batch, const LossConfig& cfg,
                      std::size_t slot = 0, std::size_t index = 0, T delta = T(0)) {
  const ModelConfig& c = params.config;
  const int h = c.hidden_channels, nb = c.n_bins, ic = c.channels;
  auto P = [&](Slot s, std::size_t i) -> T {
    T v = static_cast<T>(params.arrays[s].values[i]);
    return (s == slot && i == index) ? v + delta : v;
  };
  auto conv = [&](const std::vector<T>& in, int w_in, int h_in, int depth, Slot ws, Slot bs) {
    const int w_out = w_in / 2, h_out = h_in / 2;
    std::vector<T> out(static_cast<std::size_t>(w_out) * h_out * h);
    for (int y = 0; y < h_out; ++y)
      for (int x = 0; x < w_out; ++x)
        for (int o = 0; o < h; ++o) {
          T acc = P(bs, o);
          for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx)
              for (int ch = 0; ch < depth; ++ch)
                acc += P(ws, ((static_cast<std::size_t>(o) * 2 + dy) * 2 + dx) * depth + ch) *
                       in[(static_cast<std::size_t>(2 * y + dy) * w_in + 2 * x + dx) * depth + ch];
          out[(static_cast<std::size_t>(y) * w_out + x) * h + o] = std::tanh(acc);
        }
    return out;
  };
  auto mlp_hidden = [&](const std::vector<T>& f, Slot ws, Slot bs) {
    std::vector<T> a(static_cast<std::size_t>(h));
    for (int o = 0; o < h; ++o) {
      T acc = P(bs, o);
      for (int i = 0; i < h; ++i) acc += P(ws, static_cast<std::size_t>(o) * h + i) * f[i];
      a[o] = std::tanh(acc);
    }
    return a;
  };
  auto bce = [](T z, T t) { return std::max(z, T(0)) - z * t + std::log1p(std::exp(-std::abs(z))); };

  std::size_t n_full = 0, n_weak = 0;
  for (const auto& s : batch) (s.domain == Domain::full ? n_full : n_weak)++;
  const bool use_w = cfg.use_contact_loss && cfg.lambda1 != 0.0;
  const bool use_d = cfg.use_domain_loss && cfg.lambda2 != 0.0;
  T l_p = 0, l_w = 0, l_d = 0;
  for (const auto& s : batch) {
    std::vector<T> in(s.features.data.begin(), s.features.data.end());
    auto h1 = conv(in, c.width, c.height, ic, kEnc1W, kEnc1B);
    auto h2 = conv(h1, c.width / 2, c.height / 2, h, kEnc2W, kEnc2B);
    const int bw = c.width / 4, bh = c.height / 4;
    std::vector<T> pooled(static_cast<std::size_t>(h), T(0));
    for (int i = 0; i < bw * bh; ++i)
      for (int o = 0; o < h; ++o) pooled[o] += h2[static_cast<std::size_t>(i) * h + o];
    for (T& v : pooled) v /= static_cast<T>(bw * bh);

    if (s.domain == Domain::full) {
      T sample = 0;
      for (int y = 0; y < c.height; ++y)
        for (int x = 0; x < c.width; ++x) {
          const T* f = &h2[(static_cast<std::size_t>(y / 4) * bw + x / 4) * h];
          std::vector<T> z(static_cast<std::size_t>(nb));
          T zmax = -std::numeric_limits<T>::infinity();
          for (int b = 0; b < nb; ++b) {
            T acc = P(kPresB, b);
            for (int o = 0; o < h; ++o) acc += P(kPresW, static_cast<std::size_t>(b) * h + o) * f[o];
            z[b] = acc;
            zmax = std::max(zmax, acc);
          }
          T norm = 0;
          for (T v : z) norm += std::exp(v - zmax);
          const int k = s.target.at(x, y);
          for (int b = 0; b < nb; ++b) {
            T rho = std::exp(z[b] - zmax) / norm;
            sample -= std::exp(-static_cast<T>(std::abs(b - k))) * std::log(std::max(rho, T(kProbEpsilon)));
          }
        }
      if (cfg.pixel_reduction == PixelReduction::mean) sample /= static_cast<T>(c.width * c.height);
      l_p += sample / static_cast<T>(n_full);
    }
    if (use_w) {
      auto a = mlp_hidden(pooled, kContact1W, kContact1B);
      const int count = s.label.force == ForceLevel::unspecified ? 5 : 6;
      T sample = 0;
      for (int j = 0; j < kContactLabelSize; ++j) {
        if (j == 5 && count == 5) continue;
        T z = P(kContact2B, j);
        for (int i = 0; i < h; ++i) z += P(kContact2W, static_cast<std::size_t>(j) * h + i) * a[i];
        const T t = j < 5 ? T(s.label.fingers[j]) : T(s.label.force == ForceLevel::high ? 1 : 0);
        sample += bce(z, t);
      }
      l_w += sample / static_cast<T>(count) / static_cast<T>(batch.size());
    }
    if (use_d) {
      auto a = mlp_hidden(pooled, kDisc1W, kDisc1B);
      T z = P(kDisc2B, 0);
      for (int i = 0; i < h; ++i) z += P(kDisc2W, i) * a[i];
      const bool full = s.domain == Domain::full;
      l_d += bce(z, full ? T(1) : T(0)) / static_cast<T>(full ? n_full : n_weak);
    }
  }
  T total = l_p;
  if (use_w) total += static_cast<T>(cfg.lambda1) * l_w;
  if (use_d) total += static_cast<T>(cfg.lambda2) * l_d;
  return total;
}

}  // namespace reference

/// Max relative error between the analytic gradient of the combined loss and
/// central finite differences with step `step`, evaluated in extended precision.
/// Per component: |a - n| / max(|a|, |n|, floor).
inline double gradient_check(const ModelParams& params, std::span<const TrainSample> batch, const LossConfig& cfg,
                             double step = 1e-4, double floor = 1e-12) {
  using Wide = long double;
  GradientResult analytic = compute_gradients(params, batch, cfg, false);
  const Wide h = static_cast<Wide>(step);
  double worst = 0.0;
  for (std::size_t s = 0; s < params.arrays.size(); ++s) {
    for (std::size_t i = 0; i < params.arrays[s].values.size(); ++i) {
      const Wide up = reference::combined_loss_value<Wide>(params, batch, cfg, s, i, h);
      const Wide down = reference::combined_loss_value<Wide>(params, batch, cfg, s, i, -h);
      const double numeric = static_cast<double>((up - down) / (2 * h));
      const double a = analytic.grads[s][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), floor});
      worst = std::max(worst, std::abs(a - numeric) / denom);
    }
  }
  return worst;
}

}  // namespace pressense
