#pragma once

// Pressure images, contact images and the logarithmic bin representation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pressense/error.hpp"
#include "pressense/grid.hpp"

namespace pressense {

/// Contact threshold P_th in kPa.
inline constexpr double kContactThresholdKpa = 1.0;

/// Dense grid of non-negative, finite pressures in kPa.
class PressureImage {
 public:
  PressureImage() = default;
  PressureImage(int width, int height) : grid_(width, height, 0.0) {}
  PressureImage(int width, int height, std::vector<double> values)
      : grid_(width, height, std::move(values)) {
    for (double v : grid_.data) check_value(v);
  }

  int width() const noexcept { return grid_.width; }
  int height() const noexcept { return grid_.height; }
  std::size_t size() const noexcept { return grid_.size(); }
  double at(int x, int y) const { return grid_.at(x, y); }
  void set(int x, int y, double kpa) {
    check_value(kpa);
    grid_.at(x, y) = kpa;
  }
  std::span<const double> values() const noexcept { return grid_.data; }
  bool same_shape(const PressureImage& o) const noexcept { return grid_.same_shape(o.grid_); }

  double sum() const noexcept {
    double s = 0.0;
    for (double v : grid_.data) s += v;
    return s;
  }
  double max() const noexcept {
    double m = 0.0;
    for (double v : grid_.data) m = std::max(m, v);
    return m;
  }

  friend bool operator==(const PressureImage&, const PressureImage&) = default;

 private:
  static void check_value(double v) {
    if (!std::isfinite(v) || v < 0.0)
      throw InvalidArgument("pressure values must be finite and non-negative, got " + std::to_string(v));
  }

  Grid<double> grid_;
};

using ContactImage = Grid<std::uint8_t>;
using BinIndexImage = Grid<int>;

/// Logarithmic quantization of pressure.
///
/// Bin 0 is the zero bin [0, p_low). Bin j >= 1 covers [edges[j-1], edges[j]);
/// edges[j] = p_low * (p_high / p_low)^(j / (n_bins - 1)), so edges.front() == p_low
/// and edges.back() == p_high. Values at or above p_high clamp into the top bin.
struct BinSpec {
  int n_bins = 0;
  double p_low = 0.0;
  double p_high = 0.0;
  std::vector<double> edges;

  /// Bin index for a single pressure value (half-open intervals, top clamp).
  int bin_of(double kpa) const noexcept {
    if (!(kpa >= p_low)) return 0;
    // First edge strictly greater than the value closes the containing bin.
    auto it = std::upper_bound(edges.begin(), edges.end(), kpa);
    int j = static_cast<int>(it - edges.begin());
    return std::min(j, n_bins - 1);
  }

  /// Representative pressure: 0 for the zero bin, geometric mean of the edges otherwise.
  double representative(int bin) const {
    if (bin < 0 || bin >= n_bins) throw InvalidArgument("bin index out of range");
    if (bin == 0) return 0.0;
    return std::sqrt(edges[bin - 1] * edges[bin]);
  }

  friend bool operator==(const BinSpec&, const BinSpec&) = default;
};

inline BinSpec make_bin_spec(int n_bins = 9, double p_low = 1.0, double p_high = 30.0) {
  if (n_bins < 2) throw InvalidArgument("n_bins must be >= 2");
  if (!(p_low > 0.0) || !(p_high > p_low) || !std::isfinite(p_high))
    throw InvalidArgument("bin range requires 0 < p_low < p_high");
  BinSpec spec{n_bins, p_low, p_high, {}};
  spec.edges.resize(static_cast<std::size_t>(n_bins));
  const double ratio = p_high / p_low;
  for (int j = 0; j < n_bins; ++j)
    spec.edges[j] = p_low * std::pow(ratio, static_cast<double>(j) / (n_bins - 1));
  spec.edges.front() = p_low;
  spec.edges.back() = p_high;
  return spec;
}

inline BinIndexImage quantize(const PressureImage& p, const BinSpec& spec) {
  BinIndexImage out(p.width(), p.height(), 0);
  auto values = p.values();
  for (std::size_t i = 0; i < values.size(); ++i) out.data[i] = spec.bin_of(values[i]);
  return out;
}

/// Expected pressure under per-pixel bin probabilities (depth == n_bins).
inline PressureImage decode_expected(const Volume& probs, const BinSpec& spec) {
  if (probs.depth != spec.n_bins) throw InvalidArgument("probability depth must equal n_bins");
  std::vector<double> reps(static_cast<std::size_t>(spec.n_bins));
  for (int b = 0; b < spec.n_bins; ++b) reps[b] = spec.representative(b);
  std::vector<double> out(probs.pixels());
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto px = probs.pixel(i);
    double total = 0.0, value = 0.0;
    for (int b = 0; b < spec.n_bins; ++b) {
      if (!(px[b] >= 0.0)) throw InvalidArgument("probabilities must be non-negative");
      total += px[b];
      value += px[b] * reps[b];
    }
    if (std::abs(total - 1.0) > 1e-6)
      throw InvalidArgument("probabilities at pixel " + std::to_string(i) + " sum to " + std::to_string(total));
    out[i] = value;
  }
  return PressureImage(probs.width, probs.height, std::move(out));
}

/// Representative of the most probable bin; ties go to the lower bin.
inline PressureImage decode_argmax(const Volume& scores, const BinSpec& spec) {
  if (scores.depth != spec.n_bins) throw InvalidArgument("score depth must equal n_bins");
  std::vector<double> out(scores.pixels());
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto px = scores.pixel(i);
    int best = static_cast<int>(std::max_element(px.begin(), px.end()) - px.begin());
    out[i] = spec.representative(best);
  }
  return PressureImage(scores.width, scores.height, std::move(out));
}

inline ContactImage contact_image(const PressureImage& p, double threshold = kContactThresholdKpa) {
  if (!(threshold > 0.0)) throw InvalidArgument("contact threshold must be positive");
  ContactImage out(p.width(), p.height(), std::uint8_t{0});
  auto values = p.values();
  for (std::size_t i = 0; i < values.size(); ++i) out.data[i] = values[i] >= threshold ? 1 : 0;
  return out;
}

inline bool any_contact(const PressureImage& p, double threshold = kContactThresholdKpa) {
  for (double v : p.values())
    if (v >= threshold) return true;
  return false;
}

}  // namespace pressense
