#include <gtest/gtest.h>

#include <cmath>

#include "../common/test_support.hpp"
#include "hsx/spectral/tokenizer.hpp"

using namespace hsx;

TEST(PositionalEncoding, ReferenceValuesAt470nm) {
  // Reference values computed at 30 significant digits.
  const auto pe = positional_encoding(470.0, 32);
  EXPECT_NEAR(pe[0], -0.945425512269323697822880019864, 1e-12);
  EXPECT_NEAR(pe[1], 0.325838304608722861725093510208, 1e-12);
  EXPECT_NEAR(pe[2], 0.395525500733770675281963638534, 1e-12);
  EXPECT_NEAR(pe[3], 0.918454995233462690218481064577, 1e-12);
  EXPECT_NEAR(pe[30], 0.0834818596471271550802266487296, 1e-12);
  EXPECT_NEAR(pe[31], 0.996509297051390967478163018114, 1e-12);
}

TEST(PositionalEncoding, PairsLieOnTheUnitCircle) {
  for (double nm : {200.0, 450.5, 971.25, 2500.0})
    for (std::size_t d : {4u, 8u, 32u, 64u}) {
      const auto pe = positional_encoding(nm, d);
      ASSERT_EQ(pe.size(), d);
      for (std::size_t i = 0; i < d; i += 2) EXPECT_NEAR(pe[i] * pe[i] + pe[i + 1] * pe[i + 1], 1.0, 1e-12);
    }
}

TEST(PositionalEncoding, ZeroWavelengthIsSinZeroCosOne) {
  const auto pe = positional_encoding(0.0, 16);
  for (std::size_t i = 0; i < 16; i += 2) {
    EXPECT_EQ(pe[i], 0.0);
    EXPECT_EQ(pe[i + 1], 1.0);
  }
}

TEST(PositionalEncoding, DistinctBandsGetDistinctCodes) {
  const auto grid = WavelengthGrid::linspace(450, 950, 128);
  const TokenizerConfig cfg{32, 10000.0};
  const auto t = positional_table<double>(grid, cfg);
  for (std::size_t a = 0; a + 1 < grid.size(); ++a) {
    double d = 0;
    for (std::size_t k = 0; k < 32; ++k) {
      const double diff = t[a * 32 + k] - t[(a + 1) * 32 + k];
      d += diff * diff;
    }
    EXPECT_GT(d, 1e-6);
  }
}

TEST(Tokenizer, OneTokenPerBand) {
  SpectralTokenizer<float> tok(TokenizerConfig{32, 10000.0});
  const auto grid = WavelengthGrid::linspace(470, 630, 15);
  const std::vector<float> s(15, 0.4f);
  const auto seq = tokenize_pixel(s, grid, tok);
  EXPECT_EQ(seq.size(), 15u);
  EXPECT_EQ(seq.tokens.shape(), (tensor::Shape{15, 32}));
  EXPECT_EQ(tok.params().count(), 33u);
}

TEST(Tokenizer, ZeroSpectrumGivesBiasPlusPositions) {
  SpectralTokenizer<double> tok(TokenizerConfig{8, 10000.0}, 3);
  tok.bias()[0] = 0.25;
  const auto grid = WavelengthGrid::linspace(600, 975, 25);
  const auto seq = tokenize_pixel(std::vector<float>(25, 0.0f), grid, tok);
  for (std::size_t c = 0; c < 25; ++c) {
    const auto pe = positional_encoding(grid[c], 8);
    for (std::size_t k = 0; k < 8; ++k) EXPECT_NEAR(seq.tokens[c * 8 + k], 0.25 + pe[k], 1e-12);
  }
}

TEST(Tokenizer, TokenIsValueEmbeddingPlusWavelengthCode) {
  SpectralTokenizer<double> tok(TokenizerConfig{8, 10000.0}, 4);
  tok.bias()[0] = -0.1;
  const auto grid = WavelengthGrid::linspace(470, 630, 5);
  const std::vector<float> s{0.1f, 0.9f, 0.3f, 0.5f, 0.7f};
  const auto seq = tokenize_pixel(s, grid, tok);
  for (std::size_t c = 0; c < 5; ++c) {
    const auto pe = positional_encoding(grid[c], 8);
    for (std::size_t k = 0; k < 8; ++k)
      EXPECT_NEAR(seq.tokens[c * 8 + k], tok.weight()[k] * static_cast<double>(s[c]) - 0.1 + pe[k], 1e-12);
  }
}

TEST(Tokenizer, BandTokenDependsOnlyOnItsValueAndWavelength) {
  // The 550 nm band sits at different indices of two sensors; its token agrees.
  SpectralTokenizer<double> tok(TokenizerConfig{16, 10000.0}, 5);
  const WavelengthGrid a(std::vector<float>{500, 550, 600}), b(std::vector<float>{450, 470, 550, 700, 900});
  const auto ta = tokenize_pixel(std::vector<float>{0.2f, 0.6f, 0.1f}, a, tok);
  const auto tb = tokenize_pixel(std::vector<float>{0.9f, 0.3f, 0.6f, 0.0f, 1.0f}, b, tok);
  for (std::size_t k = 0; k < 16; ++k) EXPECT_EQ(ta.tokens[16 + k], tb.tokens[2 * 16 + k]);
}

TEST(Tokenizer, DifferentValuesDifferByTheirEmbedding) {
  SpectralTokenizer<double> tok(TokenizerConfig{8, 10000.0}, 6);
  const auto grid = WavelengthGrid::linspace(470, 630, 3);
  const auto lo = tokenize_pixel(std::vector<float>{0.2f, 0.2f, 0.2f}, grid, tok);
  const auto hi = tokenize_pixel(std::vector<float>{0.7f, 0.2f, 0.2f}, grid, tok);
  double norm_w = 0, norm_d = 0;
  for (std::size_t k = 0; k < 8; ++k) {
    norm_w += tok.weight()[k] * tok.weight()[k];
    const double d = hi.tokens[k] - lo.tokens[k];
    norm_d += d * d;
    EXPECT_EQ(hi.tokens[8 + k], lo.tokens[8 + k]);
  }
  EXPECT_NEAR(std::sqrt(norm_d), 0.5 * std::sqrt(norm_w), 1e-7);
}

TEST(Tokenizer, CubeStreamMatchesPerPixel) {
  SpectralTokenizer<float> tok(TokenizerConfig{8, 10000.0}, 7);
  HyperCube cube;
  cube.height = 3;
  cube.width = 2;
  cube.grid = WavelengthGrid::linspace(450, 950, 12);
  const auto v = hsx::testing::random_values(6 * 12, 9, 0.0, 1.0);
  cube.reflectance.assign(v.begin(), v.end());
  std::size_t visited = 0;
  tokenize_cube<float>(cube, tok, [&](std::size_t r, std::size_t c, const SpectralTokenSequence<float>& seq) {
    EXPECT_EQ(r * 2 + c, visited++);
    EXPECT_EQ(seq.tokens.values(), tokenize_pixel(cube.pixel(r, c), cube.grid, tok).tokens.values());
  });
  EXPECT_EQ(visited, 6u);
}

TEST(Tokenizer, RejectsMismatchedInput) {
  SpectralTokenizer<float> tok(TokenizerConfig{8, 10000.0});
  EXPECT_THROW(tokenize_pixel(std::vector<float>(4, 0.0f), WavelengthGrid::linspace(470, 630, 5), tok), Error);
  EXPECT_THROW(SpectralTokenizer<float>(TokenizerConfig{7, 10000.0}), Error);
  EXPECT_THROW(SpectralTokenizer<float>(TokenizerConfig{8, 1.0}), Error);
}

TEST(WavelengthGrid, ValidationAndSpacing) {
  const auto g = WavelengthGrid::linspace(470, 630, 15);
  EXPECT_EQ(g.size(), 15u);
  EXPECT_FLOAT_EQ(g.front(), 470.0f);
  EXPECT_FLOAT_EQ(g.back(), 630.0f);
  EXPECT_THROW(WavelengthGrid(std::vector<float>{}), Error);
  EXPECT_THROW(WavelengthGrid(std::vector<float>{600, 500}), Error);
  EXPECT_THROW(WavelengthGrid(std::vector<float>{500, 3000}), Error);
}
