#pragma once

// Surrogate spectral foundation encoder: per-band tokens, a small pre-norm
// transformer stack, mean-pooled pixel embedding, and a two-layer MLP that
// reconstructs masked band reflectances during self-supervised pretraining.

#include <algorithm>
#include <set>

#include "hsx/core/container.hpp"
#include "hsx/spectral/tokenizer.hpp"
#include "hsx/tensor/nn.hpp"

namespace hsx {

struct EncoderConfig {
  std::size_t layers = 2;
  std::size_t heads = 2;
  std::size_t d_model = 32;
  std::size_t d_ff = 64;
  double pe_scale = 10000.0;

  std::size_t embedding_dim() const { return d_model; }

  void validate() const {
    if (layers == 0) throw Error(ErrorKind::Config, "encoder needs at least one layer");
    if (heads == 0 || d_model % heads != 0) throw Error(ErrorKind::Config, "d_model must be divisible by heads");
    if (d_ff == 0) throw Error(ErrorKind::Config, "d_ff must be positive");
    TokenizerConfig{d_model, pe_scale}.validate();
  }
  bool operator==(const EncoderConfig&) const = default;
};

struct MaskSpec {
  double ratio = 0.95;
  std::uint64_t seed = 42;
  StreamId stream = hsx::stream("mask");

  void validate() const {
    if (!(ratio > 0.0 && ratio < 1.0)) throw Error(ErrorKind::Config, "mask ratio must lie in (0, 1)");
  }
};

/// Number of masked bands for a sequence of `bands` tokens:
/// floor(ratio * C) clamped to [1, C-1].
inline std::size_t masked_count(std::size_t bands, double ratio) {
  if (bands < 2) throw Error(ErrorKind::Data, "masking needs at least two bands");
  auto k = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(bands)));
  return std::clamp<std::size_t>(k, 1, bands - 1);
}

/// Draws the masked band indices (sorted) uniformly without replacement.
inline std::vector<std::size_t> choose_mask(std::size_t bands, double ratio, CounterRng& rng) {
  const std::size_t k = masked_count(bands, ratio);
  auto perm = rng.permutation(bands);
  perm.resize(k);
  std::sort(perm.begin(), perm.end());
  return perm;
}

template <class T>
struct EncoderLayer {
  tensor::Tensor<T> ln1_gain, ln1_shift, w_qkv, b_qkv, w_out, b_out;
  tensor::Tensor<T> ln2_gain, ln2_shift, w_ff1, b_ff1, w_ff2, b_ff2;
};

template <class T>
struct Encoding {
  tensor::Tensor<T> tokens;  // [B x C x D]
  tensor::Tensor<T> pixel;   // [B x D]
};

template <class T>
class Encoder {
 public:
  Encoder() = default;

  explicit Encoder(EncoderConfig cfg, std::uint64_t seed = 42)
      : cfg_(cfg), tokenizer_((cfg.validate(), TokenizerConfig{cfg.d_model, cfg.pe_scale}), seed) {
    CounterRng rng(seed, stream("encoder.init"));
    const std::size_t D = cfg_.d_model, F = cfg_.d_ff;
    auto xavier = [&](std::size_t in, std::size_t out) {
      const double a = std::sqrt(6.0 / static_cast<double>(in + out));
      std::vector<T> v(in * out);
      for (auto& x : v) x = static_cast<T>(rng.uniform(-a, a));
      return tensor::Tensor<T>({in, out}, std::move(v), true);
    };
    auto filled = [](std::size_t n, T v) { return tensor::Tensor<T>({n}, v, true); };
    {
      std::vector<T> m(D);
      for (auto& x : m) x = static_cast<T>(rng.normal(0.0, 0.02));
      mask_token_ = tensor::Tensor<T>({D}, std::move(m), true);
    }
    for (std::size_t l = 0; l < cfg_.layers; ++l) {
      EncoderLayer<T> layer{filled(D, 1), filled(D, 0), xavier(D, 3 * D), filled(3 * D, 0), xavier(D, D),
                            filled(D, 0), filled(D, 1), filled(D, 0), xavier(D, F), filled(F, 0),
                            xavier(F, D), filled(D, 0)};
      layers_.push_back(std::move(layer));
    }
    final_gain_ = filled(D, 1);
    final_shift_ = filled(D, 0);
    rec_w1_ = xavier(D, D);
    rec_b1_ = filled(D, 0);
    rec_w2_ = xavier(D, 1);
    rec_b2_ = filled(1, 0);
  }

  const EncoderConfig& config() const { return cfg_; }
  const SpectralTokenizer<T>& tokenizer() const { return tokenizer_; }
  std::size_t embedding_dim() const { return cfg_.d_model; }

  /// Tokenizer, mask token, transformer layers and final norm.
  tensor::ParamList<T> backbone_params() const {
    tensor::ParamList<T> p = tokenizer_.params();
    p.add("mask_token", mask_token_);
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const auto& L = layers_[l];
      const std::string pre = "layer" + std::to_string(l) + ".";
      p.add(pre + "ln1.gain", L.ln1_gain);
      p.add(pre + "ln1.shift", L.ln1_shift);
      p.add(pre + "attn.w_qkv", L.w_qkv);
      p.add(pre + "attn.b_qkv", L.b_qkv);
      p.add(pre + "attn.w_out", L.w_out);
      p.add(pre + "attn.b_out", L.b_out);
      p.add(pre + "ln2.gain", L.ln2_gain);
      p.add(pre + "ln2.shift", L.ln2_shift);
      p.add(pre + "ff.w1", L.w_ff1);
      p.add(pre + "ff.b1", L.b_ff1);
      p.add(pre + "ff.w2", L.w_ff2);
      p.add(pre + "ff.b2", L.b_ff2);
    }
    p.add("final.gain", final_gain_);
    p.add("final.shift", final_shift_);
    return p;
  }

  tensor::ParamList<T> head_params() const {
    tensor::ParamList<T> p;
    p.add("recon.w1", rec_w1_);
    p.add("recon.b1", rec_b1_);
    p.add("recon.w2", rec_w2_);
    p.add("recon.b2", rec_b2_);
    return p;
  }

  /// All weights in serialisation order.
  tensor::ParamList<T> params() const {
    auto p = backbone_params();
    p.extend(head_params());
    return p;
  }

  /// Tokens [B x C x D] for a [B x C] reflectance batch. Flagged rows of
  /// `mask` (length B*C, may be empty) carry the mask token instead of their
  /// value embedding; the wavelength encoding is kept either way.
  tensor::Tensor<T> tokens(const tensor::Tensor<T>& values, const WavelengthGrid& grid,
                           const std::vector<bool>& mask = {}) const {
    if (values.rank() != 2 || values.dim(1) != grid.size())
      throw Error(ErrorKind::Data, "spectrum batch " + tensor::shape_str(values.shape()) + " vs " +
                                       std::to_string(grid.size()) + "-band grid");
    auto emb = tokenizer_.embed_values(values);
    if (!mask.empty()) emb = tensor::mask_rows(emb, mask_token_, mask);
    return tokenizer_.add_positions(emb, grid);
  }

  /// Runs the transformer stack on tokens [B x C x D].
  Encoding<T> encode_tokens(const tensor::Tensor<T>& tokens) const {
    if (tokens.rank() != 3 || tokens.dim(2) != cfg_.d_model)
      throw Error(ErrorKind::Dimension, "encoder input must be [B x C x " + std::to_string(cfg_.d_model) + "]");
    const std::size_t B = tokens.dim(0), C = tokens.dim(1), D = cfg_.d_model;
    if (C == 0) throw Error(ErrorKind::Data, "empty token sequence");
    auto x = tensor::reshape(tokens, {B * C, D});
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const auto& L = layers_[l];
      auto h = tensor::layer_norm(x, L.ln1_gain, L.ln1_shift);
      auto qkv = tensor::linear(h, L.w_qkv, &L.b_qkv);
      auto att = tensor::self_attention(qkv, B, C, cfg_.heads);
      x = tensor::add(x, tensor::linear(att, L.w_out, &L.b_out));
      h = tensor::layer_norm(x, L.ln2_gain, L.ln2_shift);
      h = tensor::gelu(tensor::linear(h, L.w_ff1, &L.b_ff1));
      x = tensor::add(x, tensor::linear(h, L.w_ff2, &L.b_ff2));
      if (!tensor::all_finite<T>(x.data()))
        throw Error(ErrorKind::Numeric, "non-finite activation after encoder layer " + std::to_string(l));
    }
    x = tensor::layer_norm(x, final_gain_, final_shift_);
    auto seq = tensor::reshape(x, {B, C, D});
    return {seq, tensor::mean_axis1(seq)};
  }

  Encoding<T> encode(const tensor::Tensor<T>& values, const WavelengthGrid& grid,
                     const std::vector<bool>& mask = {}) const {
    return encode_tokens(tokens(values, grid, mask));
  }

  /// Single pre-tokenised sequence -> per-token [C x D] and pixel [D] embeddings.
  std::pair<tensor::Tensor<T>, tensor::Tensor<T>> encode(const SpectralTokenSequence<T>& seq) const {
    auto e = encode_tokens(tensor::reshape(seq.tokens, {1, seq.size(), cfg_.d_model}));
    return {tensor::reshape(e.tokens, {seq.size(), cfg_.d_model}), tensor::reshape(e.pixel, {cfg_.d_model})};
  }

  /// Replaces the flagged tokens of a single sequence by mask token plus the
  /// band's wavelength encoding.
  SpectralTokenSequence<T> mask_tokens(const SpectralTokenSequence<T>& seq,
                                       const std::vector<std::size_t>& masked) const {
    const std::size_t C = seq.size(), D = cfg_.d_model;
    std::vector<bool> flag(C, false);
    for (auto i : masked) {
      if (i >= C) throw Error(ErrorKind::Data, "mask index out of range");
      flag[i] = true;
    }
    auto pe = positional_table<T>(seq.grid, tokenizer_.config());
    std::vector<T> pe_masked(C * D, T(0));
    for (std::size_t c = 0; c < C; ++c)
      if (flag[c]) std::copy_n(pe.data().data() + c * D, D, pe_masked.data() + c * D);
    auto replaced = tensor::mask_rows(seq.tokens, mask_token_, flag);
    return {tensor::add(replaced, tensor::Tensor<T>({C, D}, std::move(pe_masked))), seq.grid};
  }

  /// Draws a mask for `seq` and applies it.
  std::pair<SpectralTokenSequence<T>, std::vector<std::size_t>> mask_tokens(const SpectralTokenSequence<T>& seq,
                                                                            const MaskSpec& spec) const {
    spec.validate();
    CounterRng rng(spec.seed, spec.stream);
    auto idx = choose_mask(seq.size(), spec.ratio, rng);
    return {mask_tokens(seq, idx), idx};
  }

  /// Predicted reflectance for the given rows of per-token embeddings [N x D].
  tensor::Tensor<T> reconstruct(const tensor::Tensor<T>& token_embeddings, std::vector<std::size_t> rows) const {
    const std::size_t D = cfg_.d_model;
    auto flat = tensor::reshape(token_embeddings, {token_embeddings.size() / D, D});
    if (rows.empty()) return tensor::Tensor<T>(tensor::Shape{0});
    auto sel = tensor::gather_rows(flat, std::move(rows));
    auto h = tensor::gelu(tensor::linear(sel, rec_w1_, &rec_b1_));
    auto y = tensor::linear(h, rec_w2_, &rec_b2_);
    return tensor::reshape(y, {y.size()});
  }

  /// Detaches every weight from gradient tracking (or re-enables it).
  void set_trainable(bool trainable) {
    auto p = params();
    p.set_requires_grad(trainable);
  }

 private:
  EncoderConfig cfg_;
  SpectralTokenizer<T> tokenizer_;
  tensor::Tensor<T> mask_token_;
  std::vector<EncoderLayer<T>> layers_;
  tensor::Tensor<T> final_gain_, final_shift_;
  tensor::Tensor<T> rec_w1_, rec_b1_, rec_w2_, rec_b2_;
};

}  // namespace hsx
