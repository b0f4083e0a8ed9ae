#include <gtest/gtest.h>

#include <random>

#include "pressense/geometry.hpp"

using namespace pressense;

namespace {

std::vector<Correspondence> square_to(double dx, double dy) {
  return {{{0, 0}, {dx, dy}}, {{1, 0}, {1 + dx, dy}}, {{1, 1}, {1 + dx, 1 + dy}}, {{0, 1}, {dx, 1 + dy}}};
}

PressureImage gaussian(int w, int h, double cx, double cy, double peak, double sx, double sy) {
  PressureImage img(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double v = peak * std::exp(-0.5 * (std::pow((x - cx) / sx, 2) + std::pow((y - cy) / sy, 2)));
      img.set(x, y, v);
    }
  return img;
}

PressureImage add(const PressureImage& a, const PressureImage& b) {
  std::vector<double> v(a.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.values()[i] + b.values()[i];
  return PressureImage(a.width(), a.height(), v);
}

}  // namespace

TEST(Homography, IdentityAndTranslation) {
  auto id = estimate_homography(square_to(0, 0));
  EXPECT_TRUE(id.matrix().isApprox(Eigen::Matrix3d::Identity(), 1e-10));
  EXPECT_LT((id.matrix() - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff(), 1e-10);

  auto t = estimate_homography(square_to(5, 7));
  Eigen::Matrix3d expected = Eigen::Matrix3d::Identity();
  expected(0, 2) = 5;
  expected(1, 2) = 7;
  EXPECT_LT((t.matrix() - expected).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_EQ(t.matrix()(2, 2), 1.0);
}

TEST(Homography, RecoversRandomHomographies) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0), sx(0.0, 105.0), sy(0.0, 185.0);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::Matrix3d m;
    m << 2.0 + 0.3 * u(rng), 0.3 * u(rng), 50 * u(rng), 0.3 * u(rng), 2.0 + 0.3 * u(rng), 50 * u(rng),
        1e-3 * u(rng), 1e-3 * u(rng), 1.0;
    Homography truth(m);
    std::vector<Correspondence> pairs;
    for (int i = 0; i < 20; ++i) {
      Point2 s{sx(rng), sy(rng)};
      pairs.push_back({s, truth.apply(s)});
    }
    auto est = estimate_homography(pairs);
    EXPECT_LT(reprojection_error(est, pairs), 1e-6);
  }
}

TEST(Homography, DegenerateInputs) {
  std::vector<Correspondence> line;
  for (int i = 0; i < 6; ++i) line.push_back({{double(i), 2.0 * i}, {double(i), double(i)}});
  EXPECT_THROW(estimate_homography(line), SingularConfiguration);
  // Three of four source points collinear.
  std::vector<Correspondence> three{{{0, 0}, {0, 0}}, {{1, 0}, {1, 0}}, {{2, 0}, {2, 0.5}}, {{0, 1}, {0, 1}}};
  EXPECT_THROW(estimate_homography(three), SingularConfiguration);
  auto short_list = square_to(0, 0);
  short_list.pop_back();
  EXPECT_THROW(estimate_homography(short_list), InvalidArgument);
  Eigen::Matrix3d singular = Eigen::Matrix3d::Zero();
  singular(2, 2) = 1.0;
  EXPECT_THROW(Homography{singular}, SingularConfiguration);
}

TEST(ProjectPressure, IdentityIsExact) {
  auto img = gaussian(105, 185, 40.3, 90.1, 12.0, 3.0, 4.0);
  auto out = project_pressure(img, Homography::identity(), 105, 185);
  EXPECT_TRUE(out == img);
  auto zero = project_pressure(PressureImage(20, 30), Homography::translation(3.5, 1.25), 40, 40);
  EXPECT_EQ(zero.sum(), 0.0);
}

TEST(ProjectPressure, AffineScalesIntegral) {
  // Smooth blob well inside the sensor; affine map with area factor 2 * 1.5.
  auto img = gaussian(60, 60, 30.0, 28.0, 10.0, 4.0, 5.0);
  Eigen::Matrix3d m;
  m << 2.0, 0.2, 10.0, 0.0, 1.5, 5.0, 0.0, 0.0, 1.0;
  Homography h(m);
  auto out = project_pressure(img, h, 180, 120);
  EXPECT_NEAR(out.sum() / (img.sum() * 3.0), 1.0, 2e-3);
}

TEST(ProjectPressure, NonNegativeAndBoundedByInputMax) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 20.0), a(-0.4, 0.4);
  std::vector<double> v(30 * 20);
  for (double& x : v) x = u(rng);
  PressureImage img(30, 20, v);
  for (int t = 0; t < 10; ++t) {
    Eigen::Matrix3d m;
    m << 1.0 + a(rng), a(rng), 3 * a(rng), a(rng), 1.0 + a(rng), 3 * a(rng), 1e-3 * a(rng), 1e-3 * a(rng), 1.0;
    auto out = project_pressure(img, Homography(m), 35, 25);
    for (double x : out.values()) {
      EXPECT_GE(x, 0.0);
      EXPECT_LE(x, img.max());
    }
  }
}

TEST(FindPeaks, SingleBlob) {
  auto img = gaussian(32, 32, 10.0, 12.0, 5.0, 2.0, 2.5);
  auto peaks = find_peaks(img, 1.0, 5.0);
  ASSERT_EQ(peaks.size(), 1u);
  EXPECT_NEAR(peaks[0].x, 10.0, 0.5);
  EXPECT_NEAR(peaks[0].y, 12.0, 0.5);
  EXPECT_EQ(peaks[0].peak_pressure, 5.0);
  double above = 0.0;
  for (double v : img.values())
    if (v >= 1.0) above += v;
  EXPECT_NEAR(peaks[0].blob_force_proxy, above, 1e-9);
}

TEST(FindPeaks, SeparationAndSuppression) {
  auto far = add(gaussian(40, 20, 8.0, 10.0, 5.0, 1.5, 1.5), gaussian(40, 20, 28.0, 10.0, 4.0, 1.5, 1.5));
  EXPECT_EQ(find_peaks(far, 1.0, 5.0).size(), 2u);

  // Two sharp blobs 3 px apart: both are local maxima but only the stronger survives.
  auto near = add(gaussian(20, 20, 8.0, 10.0, 5.0, 0.6, 0.6), gaussian(20, 20, 11.0, 10.0, 4.0, 0.6, 0.6));
  auto raw = find_peaks(near, 1.0, 1.0);
  ASSERT_EQ(raw.size(), 2u);
  auto peaks = find_peaks(near, 1.0, 5.0);
  ASSERT_EQ(peaks.size(), 1u);
  EXPECT_EQ(peaks[0].peak_col, 8);
  EXPECT_EQ(find_peaks(PressureImage(5, 5), 1.0, 3.0).size(), 0u);
  EXPECT_THROW(find_peaks(near, 0.0, 3.0), InvalidArgument);
  EXPECT_THROW(find_peaks(near, 1.0, 0.5), InvalidArgument);
}

TEST(FindPeaks, PlateauTieBreak) {
  PressureImage img(6, 6);
  img.set(3, 2, 4.0);
  img.set(2, 2, 4.0);
  img.set(2, 3, 4.0);
  auto peaks = find_peaks(img, 1.0, 3.0);
  ASSERT_EQ(peaks.size(), 1u);
  EXPECT_EQ(peaks[0].peak_row, 2);
  EXPECT_EQ(peaks[0].peak_col, 2);
}

// Exhaustive characterization on random small grids: every output is a
// thresholded 8-neighbourhood maximum, outputs are at least min_distance apart,
// and every dropped local maximum lies within min_distance of an output that is
// at least as strong.
TEST(FindPeaks, CharacterizationOnSmallGrids) {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<int> level(0, 4);
  for (int t = 0; t < 2000; ++t) {
    PressureImage img(6, 5);
    for (int y = 0; y < 5; ++y)
      for (int x = 0; x < 6; ++x) img.set(x, y, static_cast<double>(level(rng)));
    const double min_d = 1.0 + (t % 3);
    auto peaks = find_peaks(img, 1.0, min_d);
    auto is_local_max = [&](int x, int y) {
      if (img.at(x, y) < 1.0) return false;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx)
          if (x + dx >= 0 && x + dx < 6 && y + dy >= 0 && y + dy < 5 && img.at(x + dx, y + dy) > img.at(x, y))
            return false;
      return true;
    };
    for (std::size_t i = 0; i < peaks.size(); ++i) {
      ASSERT_TRUE(is_local_max(peaks[i].peak_col, peaks[i].peak_row));
      ASSERT_GE(peaks[i].peak_pressure, 1.0);
      for (std::size_t j = i + 1; j < peaks.size(); ++j)
        ASSERT_GE(std::hypot(peaks[i].peak_col - peaks[j].peak_col, peaks[i].peak_row - peaks[j].peak_row), min_d);
    }
    for (int y = 0; y < 5; ++y)
      for (int x = 0; x < 6; ++x) {
        if (!is_local_max(x, y)) continue;
        bool covered = false;
        for (const auto& p : peaks)
          if ((p.peak_col == x && p.peak_row == y) ||
              (std::hypot(p.peak_col - x, p.peak_row - y) < min_d && p.peak_pressure >= img.at(x, y)))
            covered = true;
        ASSERT_TRUE(covered);
      }
  }
}

TEST(Calibration, JsonRoundTrip) {
  Calibration cal;
  cal.correspondences = square_to(5, 7);
  cal.homography = estimate_homography(cal.correspondences);
  auto j = to_json(cal);
  auto back = calibration_from_json(nlohmann::json::parse(j.dump()));
  EXPECT_TRUE(back.homography.matrix().isApprox(cal.homography.matrix(), 1e-15));
  nlohmann::json no_matrix = nlohmann::json::parse(j.dump());
  no_matrix.erase("homography");
  EXPECT_LT(reprojection_error(calibration_from_json(no_matrix).homography, cal.correspondences), 1e-9);
  EXPECT_THROW(calibration_from_json(nlohmann::json::parse(R"({"correspondences": 3})")), ParseError);
}
