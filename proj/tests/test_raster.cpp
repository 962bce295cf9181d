#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "msfa/raster.hpp"
#include "test_util.hpp"

using namespace msfa;

namespace {

double sorted_percentile(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  const double pos = p / 100.0 * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

TEST(Raster, RejectsZeroDimensions) {
  try {
    Raster(0, 0, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::zero_dimension);
  }
  EXPECT_THROW(Raster(3, 0, {}), Error);
  EXPECT_THROW(Raster(2, 2, {1.0, 2.0}), Error);
}

TEST(Raster, StoresRowMajorValues) {
  const Raster r(3, 2, {1, 2, 3, 4, 5, 6}, BitDepth::u16);
  EXPECT_EQ(r(0, 0), 1);
  EXPECT_EQ(r(2, 0), 3);
  EXPECT_EQ(r(0, 1), 4);
  EXPECT_EQ(r.bit_depth_origin(), BitDepth::u16);
  EXPECT_EQ(r.value_range().lo, 1);
  EXPECT_EQ(r.value_range().hi, 6);
}

TEST(Raster, MirrorIndexReflectsWithoutRepeatingTheEdge) {
  EXPECT_EQ(mirror_index(-1, 5), 1);
  EXPECT_EQ(mirror_index(-2, 5), 2);
  EXPECT_EQ(mirror_index(5, 5), 3);
  EXPECT_EQ(mirror_index(6, 5), 2);
  EXPECT_EQ(mirror_index(3, 5), 3);
  EXPECT_EQ(mirror_index(-7, 1), 0);
  for (int i = -50; i < 50; ++i) {
    const int m = mirror_index(i, 4);
    EXPECT_GE(m, 0);
    EXPECT_LT(m, 4);
  }
}

TEST(IntegralImage, MatchesBruteForceOnRandomRectangles) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> dim(1, 40);
  for (int trial = 0; trial < 1000; ++trial) {
    const int w = dim(rng), h = dim(rng);
    const Raster r = test::random_u8_raster(w, h, rng);
    const IntegralImage ii(r);
    std::uniform_int_distribution<int> xs(0, w - 1), ys(0, h - 1);
    const int x = xs(rng), y = ys(rng);
    std::uniform_int_distribution<int> ws(0, w - x), hs(0, h - y);
    const int rw = ws(rng), rh = hs(rng);
    double brute = 0.0;
    for (int yy = y; yy < y + rh; ++yy) {
      for (int xx = x; xx < x + rw; ++xx) brute += r(xx, yy);
    }
    ASSERT_EQ(ii.rect_sum(x, y, rw, rh), brute) << "trial " << trial;
  }
}

TEST(Normalize, MinmaxMapsEndpoints) {
  const Raster r(2, 2, {0, 255, 0, 255});
  const Raster n = normalize(r);
  EXPECT_EQ(std::vector<double>(n.values().begin(), n.values().end()), (std::vector<double>{0, 1, 0, 1}));
}

TEST(Normalize, ConstantImageMapsToZeros) {
  const Raster n = normalize(Raster::filled(5, 4, 7.0));
  for (double v : n.values()) EXPECT_EQ(v, 0.0);
  const Raster p = normalize(Raster::filled(5, 4, 7.0), NormalizePolicy::percentiles());
  for (double v : p.values()) EXPECT_EQ(v, 0.0);
}

TEST(Normalize, PercentileClipsAgainstSortOracle) {
  std::vector<double> v(100);
  for (int i = 0; i < 100; ++i) v[static_cast<std::size_t>(i)] = (i * 37) % 100;
  const Raster r(10, 10, v);
  const Raster n = normalize(r, NormalizePolicy::percentiles(2, 98));
  const double p2 = sorted_percentile(v, 2), p98 = sorted_percentile(v, 98);
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double out = n.values()[i];
    if (v[i] <= p2) EXPECT_EQ(out, 0.0);
    else if (v[i] >= p98) EXPECT_EQ(out, 1.0);
    else EXPECT_NEAR(out, (v[i] - p2) / (p98 - p2), 1e-12);
  }
}

TEST(Normalize, PercentileMatchesSortOracleOnRandomData) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const Raster r = test::random_raster(17, 9, rng, -5.0, 5.0);
    std::vector<double> v(r.values().begin(), r.values().end());
    std::uniform_real_distribution<double> p(0.0, 100.0);
    const double q = p(rng);
    EXPECT_NEAR(percentile(v, q), sorted_percentile(v, q), 1e-12);
  }
}

TEST(Normalize, MinmaxIsIdempotent) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const Raster once = normalize(test::random_raster(13, 7, rng, -3.0, 40.0));
    EXPECT_TRUE(normalize(once) == once);
  }
}

TEST(Normalize, OutputStaysInUnitInterval) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const Raster r = test::random_raster(11, 11, rng, -100.0, 100.0);
    for (auto policy : {NormalizePolicy::minmax(), NormalizePolicy::percentiles()}) {
      const Raster n = normalize(r, policy);
      EXPECT_GE(n.value_range().lo, 0.0);
      EXPECT_LE(n.value_range().hi, 1.0);
    }
  }
}

TEST(Resample, BilinearPreservesConstants) {
  const Raster r = resample(Raster::filled(64, 64, 0.5), 128, 128);
  EXPECT_EQ(r.width(), 128);
  EXPECT_EQ(r.height(), 128);
  for (double v : r.values()) EXPECT_EQ(v, 0.5);
}

TEST(Resample, SameSizeIsIdentity) {
  std::mt19937_64 rng(8);
  const Raster r = test::random_raster(2, 2, rng);
  EXPECT_TRUE(resample(r, 2, 2) == r);
  const Raster big = test::random_raster(19, 23, rng);
  EXPECT_TRUE(resample(big, 19, 23, Interpolation::nearest) == big);
  EXPECT_TRUE(resample(big, 19, 23, Interpolation::bilinear) == big);
}

TEST(Resample, RampDownsampleMatchesInterpolationOracle) {
  const Raster ramp = test::from_function(4, 4, [](int x, int y) { return x + 4.0 * y; });
  const Raster out = resample(ramp, 2, 2);
  // Pixel-centre alignment: destination d samples source (d + 0.5) * 2 - 0.5.
  auto oracle = [&](int dx, int dy) {
    const double sx = (dx + 0.5) * 2.0 - 0.5, sy = (dy + 0.5) * 2.0 - 0.5;
    const int x0 = static_cast<int>(std::floor(sx)), y0 = static_cast<int>(std::floor(sy));
    const double fx = sx - x0, fy = sy - y0;
    const double top = (1 - fx) * ramp(x0, y0) + fx * ramp(x0 + 1, y0);
    const double bottom = (1 - fx) * ramp(x0, y0 + 1) + fx * ramp(x0 + 1, y0 + 1);
    return (1 - fy) * top + fy * bottom;
  };
  for (int y = 0; y < 2; ++y) {
    for (int x = 0; x < 2; ++x) EXPECT_NEAR(out(x, y), oracle(x, y), 1e-9);
  }
}

TEST(Resample, RejectsZeroTarget) {
  EXPECT_THROW(resample(Raster::filled(4, 4, 1.0), 0, 4), Error);
}

TEST(Resample, NearestPicksSourcePixels) {
  const Raster r(2, 1, {1.0, 2.0});
  const Raster up = resample(r, 4, 1, Interpolation::nearest);
  EXPECT_EQ(std::vector<double>(up.values().begin(), up.values().end()), (std::vector<double>{1, 1, 2, 2}));
}

TEST(CropAndPad, CropExtractsWindowAndPadMirrors) {
  const Raster r = test::from_function(5, 4, [](int x, int y) { return 10.0 * y + x; });
  const Raster c = crop(r, 1, 2, 3, 2);
  EXPECT_EQ(c(0, 0), 21);
  EXPECT_EQ(c(2, 1), 33);
  EXPECT_THROW(crop(r, 3, 0, 3, 1), Error);
  const Raster p = pad_reflect(r, 2, 1, 0, 0);
  EXPECT_EQ(p.width(), 7);
  EXPECT_EQ(p.height(), 5);
  EXPECT_EQ(p(0, 1), r(2, 0));
  EXPECT_EQ(p(2, 0), r(0, 1));
}
