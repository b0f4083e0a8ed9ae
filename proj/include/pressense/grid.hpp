#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "pressense/error.hpp"

namespace pressense {

/// Row-major 2-D grid. Index (x, y) lives at y * width + x.
template <typename T>
struct Grid {
  int width = 0;
  int height = 0;
  std::vector<T> data;

  Grid() = default;
  Grid(int w, int h, T fill = T{}) : width(w), height(h) {
    if (w < 0 || h < 0) throw InvalidArgument("grid dimensions must be non-negative");
    data.assign(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill);
  }
  Grid(int w, int h, std::vector<T> values) : width(w), height(h), data(std::move(values)) {
    if (w < 0 || h < 0) throw InvalidArgument("grid dimensions must be non-negative");
    if (data.size() != static_cast<std::size_t>(w) * static_cast<std::size_t>(h))
      throw InvalidArgument("grid data length " + std::to_string(data.size()) + " != " +
                            std::to_string(w) + "x" + std::to_string(h));
  }

  std::size_t size() const noexcept { return data.size(); }
  bool contains(int x, int y) const noexcept { return x >= 0 && y >= 0 && x < width && y < height; }
  T& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
  const T& at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
  bool same_shape(const Grid& o) const noexcept { return width == o.width && height == o.height; }

  friend bool operator==(const Grid&, const Grid&) = default;
};

/// Row-major width × height × depth volume; the depth (channel) index varies fastest.
struct Volume {
  int width = 0;
  int height = 0;
  int depth = 0;
  std::vector<double> data;

  Volume() = default;
  Volume(int w, int h, int d, double fill = 0.0) : width(w), height(h), depth(d) {
    if (w < 0 || h < 0 || d < 0) throw InvalidArgument("volume dimensions must be non-negative");
    data.assign(static_cast<std::size_t>(w) * h * d, fill);
  }

  std::size_t pixels() const noexcept { return static_cast<std::size_t>(width) * height; }
  std::size_t offset(int x, int y) const noexcept {
    return (static_cast<std::size_t>(y) * width + x) * depth;
  }
  double& at(int x, int y, int c) { return data[offset(x, y) + c]; }
  double at(int x, int y, int c) const { return data[offset(x, y) + c]; }
  std::span<double> pixel(std::size_t i) { return {data.data() + i * depth, static_cast<std::size_t>(depth)}; }
  std::span<const double> pixel(std::size_t i) const {
    return {data.data() + i * depth, static_cast<std::size_t>(depth)};
  }
  bool same_shape(const Volume& o) const noexcept {
    return width == o.width && height == o.height && depth == o.depth;
  }

  friend bool operator==(const Volume&, const Volume&) = default;
};

}  // namespace pressense
