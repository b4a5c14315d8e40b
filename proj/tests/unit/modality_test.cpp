#include <gtest/gtest.h>

#include <cmath>

#include "../common/test_support.hpp"
#include "hsx/modality/prgb.hpp"

using namespace hsx;

namespace {

HyperCube cube_on(const WavelengthGrid& g, std::size_t H, std::size_t W, std::uint64_t seed) {
  HyperCube c;
  c.height = H;
  c.width = W;
  c.grid = g;
  const auto v = hsx::testing::random_values(H * W * g.size(), seed, 0.0, 1.0);
  c.reflectance.assign(v.begin(), v.end());
  c.labels.emplace(H * W, 1);
  return c;
}

}  // namespace

TEST(Prgb, TriBandAveragesContiguousThirds) {
  const auto c = cube_on(WavelengthGrid::linspace(450, 950, 10), 2, 2, 1);
  const auto p = project_prgb(c, {ProjectionMethod::TriBand});
  EXPECT_EQ(p.method_used, ProjectionMethod::TriBand);
  // 10 bands split as [0,3) [3,6) [6,10).
  const std::size_t bounds[4] = {0, 3, 6, 10};
  for (std::size_t px = 0; px < 4; ++px)
    for (std::size_t ch = 0; ch < 3; ++ch) {
      double s = 0;
      for (std::size_t b = bounds[ch]; b < bounds[ch + 1]; ++b) s += c.reflectance[px * 10 + b];
      EXPECT_NEAR(p.image.reflectance[px * 3 + ch], s / static_cast<double>(bounds[ch + 1] - bounds[ch]), 1e-6);
    }
}

TEST(Prgb, FlatSpectrumGivesGreyUnderTriBand) {
  HyperCube c;
  c.height = 1;
  c.width = 3;
  c.grid = WavelengthGrid::linspace(400, 700, 31);
  for (float level : {0.2f, 0.5f, 0.8f})
    for (std::size_t b = 0; b < 31; ++b) c.reflectance.push_back(level);
  const auto p = project_prgb(c, {ProjectionMethod::TriBand});
  for (std::size_t px = 0; px < 3; ++px) {
    EXPECT_EQ(p.image.reflectance[px * 3], c.reflectance[px * 31]);
    EXPECT_EQ(p.image.reflectance[px * 3 + 1], c.reflectance[px * 31]);
    EXPECT_EQ(p.image.reflectance[px * 3 + 2], c.reflectance[px * 31]);
  }
}

TEST(Prgb, SixBandsGiveThePairwiseMeans) {
  HyperCube c;
  c.height = c.width = 1;
  c.grid = WavelengthGrid::linspace(600, 975, 6);
  c.reflectance = {0.1f, 0.3f, 0.4f, 0.8f, 1.0f, 0.0f};
  const auto p = project_prgb(c, {ProjectionMethod::TriBand});
  EXPECT_NEAR(p.image.reflectance[0], 0.2, 1e-7);
  EXPECT_NEAR(p.image.reflectance[1], 0.6, 1e-7);
  EXPECT_NEAR(p.image.reflectance[2], 0.5, 1e-7);
}

TEST(Prgb, CieWeightsFollowTheCurves) {
  // A single bright band at 450 nm lights the blue channel most.
  HyperCube c;
  c.height = c.width = 1;
  c.grid = WavelengthGrid::linspace(400, 700, 31);
  c.reflectance.assign(31, 0.0f);
  c.reflectance[5] = 1.0f;
  const auto p = project_prgb(c);
  EXPECT_EQ(p.method_used, ProjectionMethod::Cie);
  EXPECT_FLOAT_EQ(p.image.reflectance[0], 1.0f);
  EXPECT_NEAR(p.image.reflectance[1], std::exp(-0.5 * 2.5 * 2.5), 1e-6);
  EXPECT_NEAR(p.image.reflectance[2], std::exp(-0.5 * 3.75 * 3.75), 1e-6);
}

TEST(Prgb, NearInfraredGridFallsBackToTriBand) {
  const auto c = cube_on(WavelengthGrid::linspace(600, 975, 25), 2, 2, 2);
  EXPECT_FALSE(cie_supported(c.grid));
  const auto p = project_prgb(c);
  EXPECT_EQ(p.method_used, ProjectionMethod::TriBand);
  EXPECT_STREQ(to_string(p.method_used), "tri-band");
  EXPECT_EQ(p.image.reflectance, project_prgb(c, {ProjectionMethod::TriBand}).image.reflectance);
}

TEST(Prgb, VisibleGridsUseCie) {
  EXPECT_TRUE(cie_supported(WavelengthGrid::linspace(470, 630, 15)));
  EXPECT_TRUE(cie_supported(WavelengthGrid::linspace(450, 950, 128)));
  EXPECT_FALSE(cie_supported(WavelengthGrid(std::vector<float>{450, 550})));
  EXPECT_FALSE(cie_supported(WavelengthGrid(std::vector<float>{800, 850, 900, 950})));
}

TEST(Prgb, OutputIsAThreeBandCubeWithLabels) {
  const auto c = cube_on(WavelengthGrid::linspace(470, 630, 15), 3, 5, 3);
  const auto p = project_prgb(c);
  EXPECT_EQ(p.image.bands(), 3u);
  EXPECT_EQ(p.image.height, 3u);
  EXPECT_EQ(p.image.width, 5u);
  EXPECT_EQ(p.image.labels, c.labels);
  EXPECT_NO_THROW(p.image.validate());
  for (float v : p.image.reflectance) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f);
  }
}

TEST(Prgb, TriBandIsPixelwise) {
  // Projecting a cube equals projecting each pixel on its own.
  const auto c = cube_on(WavelengthGrid::linspace(600, 975, 25), 3, 3, 4);
  const auto whole = project_prgb(c, {ProjectionMethod::TriBand});
  for (std::size_t px = 0; px < 9; ++px) {
    HyperCube one;
    one.height = one.width = 1;
    one.grid = c.grid;
    const auto s = c.pixel(px);
    one.reflectance.assign(s.begin(), s.end());
    const auto p = project_prgb(one, {ProjectionMethod::TriBand});
    for (std::size_t ch = 0; ch < 3; ++ch) EXPECT_EQ(p.image.reflectance[ch], whole.image.reflectance[px * 3 + ch]);
  }
}

TEST(Prgb, Errors) {
  HyperCube c;
  c.height = c.width = 1;
  c.grid = WavelengthGrid::linspace(500, 600, 2);
  c.reflectance = {0.1f, 0.2f};
  EXPECT_THROW(project_prgb(c), Error);
  EXPECT_THROW(parse_projection("rgb"), Error);
  EXPECT_EQ(parse_projection("cie"), ProjectionMethod::Cie);
}
