#pragma once

// Sensor-to-image homography and touch-point extraction from pressure images.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "pressense/error.hpp"
#include "pressense/pressure.hpp"

namespace pressense {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point2&, const Point2&) = default;
};

struct Correspondence {
  Point2 sensor;  // source: pressure-sensor grid coordinates
  Point2 image;   // destination: image pixel coordinates
};

/// Invertible projective map; stored with H(2,2) == 1 whenever that entry is nonzero.
class Homography {
 public:
  Homography() : m_(Eigen::Matrix3d::Identity()) {}
  explicit Homography(const Eigen::Matrix3d& m) : m_(normalized(m)) {
    if (std::abs(m_.determinant()) <= 1e-12) throw SingularConfiguration("homography is not invertible");
  }

  static Homography identity() { return Homography(); }
  static Homography translation(double tx, double ty) {
    Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
    m(0, 2) = tx;
    m(1, 2) = ty;
    return Homography(m);
  }

  const Eigen::Matrix3d& matrix() const noexcept { return m_; }
  Homography inverse() const { return Homography(m_.inverse()); }

  Point2 apply(Point2 p) const {
    const double w = m_(2, 0) * p.x + m_(2, 1) * p.y + m_(2, 2);
    return {(m_(0, 0) * p.x + m_(0, 1) * p.y + m_(0, 2)) / w, (m_(1, 0) * p.x + m_(1, 1) * p.y + m_(1, 2)) / w};
  }

 private:
  static Eigen::Matrix3d normalized(const Eigen::Matrix3d& m) {
    if (!m.allFinite()) throw SingularConfiguration("homography has non-finite entries");
    if (std::abs(m(2, 2)) > 1e-15 * m.cwiseAbs().maxCoeff()) return m / m(2, 2);
    return m / m.norm();
  }

  Eigen::Matrix3d m_;
};

namespace detail {

/// Similarity transform moving the centroid to the origin with mean distance sqrt(2).
inline Eigen::Matrix3d hartley_normalization(std::span<const Point2> pts) {
  double cx = 0.0, cy = 0.0;
  for (const auto& p : pts) {
    cx += p.x;
    cy += p.y;
  }
  cx /= static_cast<double>(pts.size());
  cy /= static_cast<double>(pts.size());
  double mean_dist = 0.0;
  for (const auto& p : pts) mean_dist += std::hypot(p.x - cx, p.y - cy);
  mean_dist /= static_cast<double>(pts.size());
  if (!(mean_dist > 0.0)) throw SingularConfiguration("all points coincide");
  const double s = std::sqrt(2.0) / mean_dist;
  Eigen::Matrix3d t;
  t << s, 0, -s * cx, 0, s, -s * cy, 0, 0, 1;
  return t;
}

/// True when every point lies on one line (relative tolerance).
inline bool all_collinear(std::span<const Point2> pts) {
  Eigen::MatrixXd centered(pts.size(), 2);
  double cx = 0.0, cy = 0.0;
  for (const auto& p : pts) {
    cx += p.x;
    cy += p.y;
  }
  cx /= static_cast<double>(pts.size());
  cy /= static_cast<double>(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    centered(static_cast<Eigen::Index>(i), 0) = pts[i].x - cx;
    centered(static_cast<Eigen::Index>(i), 1) = pts[i].y - cy;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(centered);
  auto sv = svd.singularValues();
  return sv(0) == 0.0 || sv(1) <= 1e-9 * sv(0);
}

}  // namespace detail

/// Normalized direct linear transform from >= 4 correspondences (sensor -> image).
inline Homography estimate_homography(std::span<const Correspondence> pairs) {
  if (pairs.size() < 4) throw InvalidArgument("homography estimation needs at least 4 correspondences");
  std::vector<Point2> src, dst;
  for (const auto& c : pairs) {
    if (!std::isfinite(c.sensor.x) || !std::isfinite(c.sensor.y) || !std::isfinite(c.image.x) ||
        !std::isfinite(c.image.y))
      throw InvalidArgument("correspondences must be finite");
    src.push_back(c.sensor);
    dst.push_back(c.image);
  }
  if (detail::all_collinear(src) || detail::all_collinear(dst))
    throw SingularConfiguration("correspondence points are collinear");

  const Eigen::Matrix3d ts = detail::hartley_normalization(src);
  const Eigen::Matrix3d td = detail::hartley_normalization(dst);
  const auto n = static_cast<Eigen::Index>(pairs.size());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(2 * n, 9);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Vector3d p = ts * Eigen::Vector3d(src[i].x, src[i].y, 1.0);
    const Eigen::Vector3d q = td * Eigen::Vector3d(dst[i].x, dst[i].y, 1.0);
    const double x = p(0) / p(2), y = p(1) / p(2), u = q(0) / q(2), v = q(1) / q(2);
    a.row(2 * i) << -x, -y, -1, 0, 0, 0, u * x, u * y, u;
    a.row(2 * i + 1) << 0, 0, 0, -x, -y, -1, v * x, v * y, v;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  // A unique solution needs a one-dimensional (numerical) null space.
  if (sv(7) <= 1e-10 * sv(0)) throw SingularConfiguration("correspondences do not determine a unique homography");
  const Eigen::VectorXd h = svd.matrixV().col(8);
  Eigen::Matrix3d hn;
  hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
  const Eigen::Matrix3d denorm = td.inverse() * hn * ts;
  const double scale = denorm.cwiseAbs().maxCoeff();
  if (!(scale > 0.0) || std::abs((denorm / scale).determinant()) <= 1e-12)
    throw SingularConfiguration("estimated homography is singular");
  return Homography(denorm);
}

inline double reprojection_error(const Homography& h, std::span<const Correspondence> pairs) {
  double worst = 0.0;
  for (const auto& c : pairs) {
    auto p = h.apply(c.sensor);
    worst = std::max(worst, std::hypot(p.x - c.image.x, p.y - c.image.y));
  }
  return worst;
}

/// Bilinear sample at continuous pixel coordinates (pixel centers on integers).
/// Points outside [0, w-1] x [0, h-1] read as zero.
inline double sample_bilinear(const PressureImage& img, double x, double y) {
  if (!(x >= 0.0) || !(y >= 0.0) || x > img.width() - 1 || y > img.height() - 1) return 0.0;
  const int x0 = static_cast<int>(std::floor(x)), y0 = static_cast<int>(std::floor(y));
  const double fx = x - x0, fy = y - y0;
  const int x1 = std::min(x0 + 1, img.width() - 1), y1 = std::min(y0 + 1, img.height() - 1);
  const double v00 = img.at(x0, y0), v10 = img.at(x1, y0), v01 = img.at(x0, y1), v11 = img.at(x1, y1);
  const double top = fx == 0.0 ? v00 : (1.0 - fx) * v00 + fx * v10;
  const double bottom = fx == 0.0 ? v01 : (1.0 - fx) * v01 + fx * v11;
  const double value = fy == 0.0 ? top : (1.0 - fy) * top + fy * bottom;
  // Rounding must not push a convex combination past its corners.
  return std::clamp(value, std::min({v00, v10, v01, v11}), std::max({v00, v10, v01, v11}));
}

/// Warps a sensor pressure image into image space through `h` (sensor -> image)
/// by inverse mapping with bilinear sampling.
inline PressureImage project_pressure(const PressureImage& sensor, const Homography& h, int out_width,
                                      int out_height) {
  if (out_width < 0 || out_height < 0) throw InvalidArgument("output dimensions must be non-negative");
  const Homography inv = h.inverse();
  std::vector<double> out(static_cast<std::size_t>(out_width) * out_height, 0.0);
  for (int v = 0; v < out_height; ++v)
    for (int u = 0; u < out_width; ++u) {
      const Point2 s = inv.apply({static_cast<double>(u), static_cast<double>(v)});
      out[static_cast<std::size_t>(v) * out_width + u] = sample_bilinear(sensor, s.x, s.y);
    }
  return PressureImage(out_width, out_height, std::move(out));
}

struct TouchPoint {
  double x = 0.0;  // sub-pixel column
  double y = 0.0;  // sub-pixel row
  int peak_col = 0;
  int peak_row = 0;
  double peak_pressure = 0.0;      // kPa
  double blob_force_proxy = 0.0;   // kPa·px², summed over the pixels attributed to this peak
};

/// Local-maximum touch detection.
///
/// Candidates are pixels >= threshold that are >= all 8 neighbours. They are
/// accepted greedily in descending pressure (ties: smaller row, then column) and
/// any candidate closer than `min_distance` to an accepted peak is dropped.
/// Positions are refined by the 3x3 centre of mass; each above-threshold pixel is
/// attributed to the nearest accepted peak of its 8-connected blob.
inline std::vector<TouchPoint> find_peaks(const PressureImage& p, double threshold = kContactThresholdKpa,
                                          double min_distance = 3.0) {
  if (!(threshold > 0.0)) throw InvalidArgument("peak threshold must be positive");
  if (!(min_distance >= 1.0)) throw InvalidArgument("min_distance must be >= 1");
  const int w = p.width(), h = p.height();
  struct Candidate {
    double value;
    int row, col;
  };
  std::vector<Candidate> cands;
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      const double v = p.at(c, r);
      if (v < threshold) continue;
      bool is_max = true;
      for (int dr = -1; dr <= 1 && is_max; ++dr)
        for (int dc = -1; dc <= 1; ++dc) {
          if ((dr == 0 && dc == 0) || r + dr < 0 || r + dr >= h || c + dc < 0 || c + dc >= w) continue;
          if (p.at(c + dc, r + dr) > v) {
            is_max = false;
            break;
          }
        }
      if (is_max) cands.push_back({v, r, c});
    }
  std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
    if (a.value != b.value) return a.value > b.value;
    if (a.row != b.row) return a.row < b.row;
    return a.col < b.col;
  });
  std::vector<TouchPoint> out;
  for (const auto& c : cands) {
    bool suppressed = false;
    for (const auto& t : out)
      if (std::hypot(t.peak_col - c.col, t.peak_row - c.row) < min_distance) {
        suppressed = true;
        break;
      }
    if (suppressed) continue;
    TouchPoint t;
    t.peak_col = c.col;
    t.peak_row = c.row;
    t.peak_pressure = c.value;
    double sw = 0.0, sx = 0.0, sy = 0.0;
    for (int dr = -1; dr <= 1; ++dr)
      for (int dc = -1; dc <= 1; ++dc) {
        const int rr = c.row + dr, cc = c.col + dc;
        if (rr < 0 || rr >= h || cc < 0 || cc >= w) continue;
        const double v = p.at(cc, rr);
        sw += v;
        sx += v * cc;
        sy += v * rr;
      }
    t.x = sx / sw;
    t.y = sy / sw;
    out.push_back(t);
  }
  if (out.empty()) return out;

  // Blob attribution: 8-connected components of above-threshold pixels.
  std::vector<int> comp(static_cast<std::size_t>(w) * h, -1);
  std::vector<int> stack;
  int n_comp = 0;
  for (int start = 0; start < w * h; ++start) {
    if (comp[start] >= 0 || p.values()[start] < threshold) continue;
    comp[start] = n_comp;
    stack.push_back(start);
    while (!stack.empty()) {
      const int idx = stack.back();
      stack.pop_back();
      const int r = idx / w, c = idx % w;
      for (int dr = -1; dr <= 1; ++dr)
        for (int dc = -1; dc <= 1; ++dc) {
          const int rr = r + dr, cc = c + dc;
          if (rr < 0 || rr >= h || cc < 0 || cc >= w) continue;
          const int j = rr * w + cc;
          if (comp[j] < 0 && p.values()[j] >= threshold) {
            comp[j] = n_comp;
            stack.push_back(j);
          }
        }
    }
    ++n_comp;
  }
  for (int idx = 0; idx < w * h; ++idx) {
    if (comp[idx] < 0) continue;
    const int r = idx / w, c = idx % w;
    int best = -1;
    double best_d = 0.0;
    for (std::size_t k = 0; k < out.size(); ++k) {
      if (comp[out[k].peak_row * w + out[k].peak_col] != comp[idx]) continue;
      const double d = std::hypot(out[k].peak_col - c, out[k].peak_row - r);
      if (best < 0 || d < best_d) {
        best = static_cast<int>(k);
        best_d = d;
      }
    }
    if (best >= 0) out[best].blob_force_proxy += p.values()[idx];
  }
  return out;
}

/// Calibration file: {"version": 1, "correspondences": [{"sensor": [x, y], "image": [u, v]}, ...],
/// "homography": [[h00, h01, h02], [h10, h11, h12], [h20, h21, h22]]}.
struct Calibration {
  std::vector<Correspondence> correspondences;
  Homography homography;
};

inline nlohmann::ordered_json to_json(const Calibration& cal) {
  nlohmann::ordered_json j;
  j["version"] = 1;
  j["correspondences"] = nlohmann::ordered_json::array();
  for (const auto& c : cal.correspondences)
    j["correspondences"].push_back({{"sensor", {c.sensor.x, c.sensor.y}}, {"image", {c.image.x, c.image.y}}});
  const auto& m = cal.homography.matrix();
  for (int r = 0; r < 3; ++r) j["homography"].push_back({m(r, 0), m(r, 1), m(r, 2)});
  return j;
}

/// Parses a calibration file. With no "homography" entry, one is estimated from the
/// correspondences.
inline Calibration calibration_from_json(const nlohmann::json& j) {
  try {
    if (j.value("version", 1) != 1) throw VersionError("unsupported calibration version");
    Calibration cal;
    for (const auto& c : j.at("correspondences"))
      cal.correspondences.push_back({{c.at("sensor").at(0).get<double>(), c.at("sensor").at(1).get<double>()},
                                     {c.at("image").at(0).get<double>(), c.at("image").at(1).get<double>()}});
    if (j.contains("homography")) {
      Eigen::Matrix3d m;
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) m(r, c) = j.at("homography").at(r).at(c).get<double>();
      cal.homography = Homography(m);
    } else {
      cal.homography = estimate_homography(cal.correspondences);
    }
    return cal;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(0, std::string("calibration: ") + e.what());
  }
}

}  // namespace pressense
