#pragma once

// One token per band: a learned scalar embedding of the band's reflectance
// plus a sinusoidal encoding of the band's physical wavelength. Because the
// position is the wavelength itself, the same tokenizer serves any band count
// and spectral range.

#include <cmath>
#include <functional>
#include <span>

#include "hsx/core/rng.hpp"
#include "hsx/data/cube.hpp"
#include "hsx/tensor/ops.hpp"
#include "hsx/tensor/optim.hpp"

namespace hsx {

struct TokenizerConfig {
  std::size_t d_model = 32;
  double pe_scale = 10000.0;

  void validate() const {
    if (d_model < 4 || d_model % 2 != 0)
      throw Error(ErrorKind::Config, "tokenizer d_model must be even and >= 4");
    if (!(pe_scale > 1.0)) throw Error(ErrorKind::Config, "tokenizer pe_scale must exceed 1");
  }
};

/// pe[2i] = sin(nm / scale^(2i/d)), pe[2i+1] = cos(nm / scale^(2i/d)).
inline std::vector<double> positional_encoding(double nm, std::size_t d_model, double scale = 10000.0) {
  std::vector<double> pe(d_model);
  for (std::size_t i = 0; i + 1 < d_model; i += 2) {
    const double angle = nm / std::pow(scale, static_cast<double>(i) / static_cast<double>(d_model));
    pe[i] = std::sin(angle);
    pe[i + 1] = std::cos(angle);
  }
  return pe;
}

/// [C x d_model] table of encodings for every band of `grid`.
template <class T>
tensor::Tensor<T> positional_table(const WavelengthGrid& grid, const TokenizerConfig& cfg) {
  std::vector<T> v(grid.size() * cfg.d_model);
  for (std::size_t c = 0; c < grid.size(); ++c) {
    auto pe = positional_encoding(grid[c], cfg.d_model, cfg.pe_scale);
    for (std::size_t d = 0; d < cfg.d_model; ++d) v[c * cfg.d_model + d] = static_cast<T>(pe[d]);
  }
  return tensor::Tensor<T>({grid.size(), cfg.d_model}, std::move(v));
}

template <class T>
struct SpectralTokenSequence {
  tensor::Tensor<T> tokens;  // [C x d_model]
  WavelengthGrid grid;

  std::size_t size() const { return grid.size(); }
};

/// Learned part of the tokenizer: a d_model x 1 embedding map and one shared
/// scalar bias, i.e. d_model + 1 parameters.
template <class T>
class SpectralTokenizer {
 public:
  SpectralTokenizer() = default;

  explicit SpectralTokenizer(TokenizerConfig cfg, std::uint64_t seed = 42) : cfg_(cfg) {
    cfg_.validate();
    CounterRng rng(seed, stream("tokenizer.init"));
    std::vector<T> w(cfg_.d_model);
    for (auto& x : w) x = static_cast<T>(rng.uniform(-1.0, 1.0));
    weight_ = tensor::Tensor<T>({1, cfg_.d_model}, std::move(w), true);
    bias_ = tensor::zeros<T>({1}, true);
  }

  const TokenizerConfig& config() const { return cfg_; }
  tensor::Tensor<T>& weight() { return weight_; }
  tensor::Tensor<T>& bias() { return bias_; }
  const tensor::Tensor<T>& weight() const { return weight_; }
  const tensor::Tensor<T>& bias() const { return bias_; }

  /// Value embeddings for a [B x C] reflectance tensor -> [B*C x d_model],
  /// without positional encoding.
  tensor::Tensor<T> embed_values(const tensor::Tensor<T>& values) const {
    auto col = tensor::reshape(values, {values.size(), 1});
    return tensor::linear(col, weight_, &bias_);
  }

  /// Adds wavelength encodings to [B*C x d_model] embeddings -> [B x C x d_model].
  tensor::Tensor<T> add_positions(const tensor::Tensor<T>& emb, const WavelengthGrid& grid) const {
    const std::size_t C = grid.size();
    const std::size_t B = emb.dim(0) / C;
    return tensor::add(tensor::reshape(emb, {B, C, cfg_.d_model}), positional_table<T>(grid, cfg_));
  }

  /// Tokens for a batch: values [B x C] -> [B x C x d_model].
  tensor::Tensor<T> tokenize(const tensor::Tensor<T>& values, const WavelengthGrid& grid) const {
    if (values.rank() != 2 || values.dim(1) != grid.size())
      throw Error(ErrorKind::Data, "spectrum batch " + tensor::shape_str(values.shape()) + " does not match a " +
                                       std::to_string(grid.size()) + "-band grid");
    return add_positions(embed_values(values), grid);
  }

  tensor::ParamList<T> params() const {
    tensor::ParamList<T> p;
    p.add("tokenizer.weight", weight_);
    p.add("tokenizer.bias", bias_);
    return p;
  }

 private:
  TokenizerConfig cfg_;
  tensor::Tensor<T> weight_;
  tensor::Tensor<T> bias_;
};

template <class T>
SpectralTokenSequence<T> tokenize_pixel(std::span<const float> spectrum, const WavelengthGrid& grid,
                                        const SpectralTokenizer<T>& tok) {
  if (spectrum.size() != grid.size())
    throw Error(ErrorKind::Data, "spectrum has " + std::to_string(spectrum.size()) + " values but the grid has " +
                                     std::to_string(grid.size()) + " bands");
  std::vector<T> v(spectrum.begin(), spectrum.end());
  auto tokens = tok.tokenize(tensor::Tensor<T>({1, grid.size()}, std::move(v)), grid);
  return {tensor::reshape(tokens, {grid.size(), tok.config().d_model}), grid};
}

/// Streams the token sequence of every pixel (row-major) to `sink`; only one
/// sequence is alive at a time.
template <class T>
void tokenize_cube(const HyperCube& cube, const SpectralTokenizer<T>& tok,
                   const std::function<void(std::size_t row, std::size_t col, const SpectralTokenSequence<T>&)>& sink) {
  for (std::size_t r = 0; r < cube.height; ++r)
    for (std::size_t c = 0; c < cube.width; ++c) sink(r, c, tokenize_pixel(cube.pixel(r, c), cube.grid, tok));
}

}  // namespace hsx
