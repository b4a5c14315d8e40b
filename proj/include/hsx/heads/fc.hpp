#pragma once

// Fully connected softmax classifier and the spectral-model interface shared by
// every per-pixel classifier.

#include "hsx/encoder/encoder.hpp"

namespace hsx {

struct FCHeadConfig {
  std::size_t in_dim = 32;
  std::size_t classes = 2;

  void validate() const {
    if (in_dim == 0) throw Error(ErrorKind::Config, "FC head input dim must be positive");
    if (classes < 2) throw Error(ErrorKind::Config, "FC head needs at least two classes");
  }
};

/// Per-pixel classifier over an [N x F] input.
template <class T>
class SpectralModel {
 public:
  virtual ~SpectralModel() = default;
  virtual tensor::Tensor<T> logits(const tensor::Tensor<T>& x, bool train) = 0;
  virtual tensor::ParamList<T> params() const = 0;
  virtual std::size_t input_dim() const = 0;
  virtual std::size_t classes() const = 0;

  tensor::Tensor<T> probabilities(const tensor::Tensor<T>& x) { return tensor::softmax(logits(x, false)); }
};

template <class T>
class FCHead : public SpectralModel<T> {
 public:
  explicit FCHead(FCHeadConfig cfg, std::uint64_t seed = 42) : cfg_(cfg) {
    cfg_.validate();
    CounterRng rng(seed, stream("fc.init"));
    const double a = 1.0 / std::sqrt(static_cast<double>(cfg.in_dim));
    std::vector<T> w(cfg.in_dim * cfg.classes);
    for (auto& x : w) x = static_cast<T>(rng.uniform(-a, a));
    w_ = tensor::Tensor<T>({cfg.in_dim, cfg.classes}, std::move(w), true);
    b_ = tensor::Tensor<T>({cfg.classes}, T(0), true);
  }

  tensor::Tensor<T> logits(const tensor::Tensor<T>& x, bool) override { return tensor::linear(x, w_, &b_); }

  tensor::ParamList<T> params() const override {
    tensor::ParamList<T> p;
    p.add("fc.weight", w_);
    p.add("fc.bias", b_);
    return p;
  }
  std::size_t input_dim() const override { return cfg_.in_dim; }
  std::size_t classes() const override { return cfg_.classes; }

  tensor::Tensor<T>& weight() { return w_; }
  tensor::Tensor<T>& bias() { return b_; }

 private:
  FCHeadConfig cfg_;
  tensor::Tensor<T> w_, b_;
};

/// softmax(W e + b) for a single embedding.
template <class T>
std::vector<T> fc_forward(FCHead<T>& head, std::span<const T> embedding) {
  tensor::Tensor<T> x({1, embedding.size()}, std::vector<T>(embedding.begin(), embedding.end()));
  return head.probabilities(x).values();
}

/// Encoder and FC head trained together on raw spectra of one sensor grid.
/// With `freeze_backbone` the encoder weights are excluded from the
/// optimiser and carry no gradient.
template <class T>
class BackboneClassifier : public SpectralModel<T> {
 public:
  BackboneClassifier(Encoder<T> encoder, WavelengthGrid grid, std::size_t classes, bool freeze_backbone,
                     std::uint64_t seed = 42)
      : enc_(std::move(encoder)),
        grid_(std::move(grid)),
        head_(FCHeadConfig{enc_.embedding_dim(), classes}, seed),
        frozen_(freeze_backbone) {
    enc_.set_trainable(!frozen_);
    // The reconstruction head is not part of the classifier.
    auto rec = enc_.head_params();
    rec.set_requires_grad(false);
  }

  tensor::Tensor<T> logits(const tensor::Tensor<T>& x, bool train) override {
    return head_.logits(enc_.encode(x, grid_).pixel, train);
  }

  tensor::ParamList<T> params() const override {
    auto p = head_.params();
    if (!frozen_) p.extend(enc_.backbone_params());
    return p;
  }
  std::size_t input_dim() const override { return grid_.size(); }
  std::size_t classes() const override { return head_.classes(); }
  const Encoder<T>& encoder() const { return enc_; }

 private:
  Encoder<T> enc_;
  WavelengthGrid grid_;
  FCHead<T> head_;
  bool frozen_;
};

}  // namespace hsx
