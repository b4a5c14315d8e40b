#pragma once

// Small 1D CNN over a pixel spectrum:
//   conv(k=6, 6 ch) -> relu -> pool2 -> conv(k=6, 12 ch) -> relu -> pool2 -> flatten -> FC(K)

#include "hsx/heads/fc.hpp"
#include "hsx/tensor/conv.hpp"

namespace hsx {

struct JustoLiuConfig {
  std::size_t kernel = 6;
  std::size_t channels1 = 6;
  std::size_t channels2 = 12;
  std::size_t classes = 2;

  /// Shortest spectrum that survives both pooling stages.
  std::size_t min_length() const { return 4; }
};

template <class T>
class JustoLiuNet : public SpectralModel<T> {
 public:
  JustoLiuNet(JustoLiuConfig cfg, std::size_t length, std::uint64_t seed = 42) : cfg_(cfg), length_(length) {
    if (cfg.classes < 2) throw Error(ErrorKind::Config, "1D CNN needs at least two classes");
    if (cfg.kernel == 0 || cfg.channels1 == 0 || cfg.channels2 == 0)
      throw Error(ErrorKind::Config, "1D CNN extents must be positive");
    if (length < cfg.min_length())
      throw Error(ErrorKind::Shape, "spectrum of " + std::to_string(length) + " bands is shorter than the " +
                                        std::to_string(cfg.min_length()) + "-band receptive field");
    CounterRng rng(seed, stream("justoliu.init"));
    auto init = [&](tensor::Shape s, std::size_t fan_in) {
      const double a = std::sqrt(6.0 / static_cast<double>(fan_in));
      std::vector<T> v(tensor::numel(s));
      for (auto& x : v) x = static_cast<T>(rng.uniform(-a, a));
      return tensor::Tensor<T>(std::move(s), std::move(v), true);
    };
    k1_ = init({cfg.kernel, 1, cfg.channels1}, cfg.kernel);
    b1_ = tensor::Tensor<T>({cfg.channels1}, T(0), true);
    k2_ = init({cfg.kernel, cfg.channels1, cfg.channels2}, cfg.kernel * cfg.channels1);
    b2_ = tensor::Tensor<T>({cfg.channels2}, T(0), true);
    flat_ = (length / 2) / 2 * cfg.channels2;
    w_ = init({flat_, cfg.classes}, flat_);
    b_ = tensor::Tensor<T>({cfg.classes}, T(0), true);
  }

  tensor::Tensor<T> logits(const tensor::Tensor<T>& x, bool) override {
    if (x.rank() != 2 || x.dim(1) != length_)
      throw Error(ErrorKind::Shape, "1D CNN built for " + std::to_string(length_) + " bands, got " +
                                        tensor::shape_str(x.shape()));
    const std::size_t N = x.dim(0), pad = (cfg_.kernel - 1) / 2;
    auto h = tensor::reshape(x, {N, length_, 1});
    h = tensor::maxpool1d(tensor::relu(tensor::conv1d(h, k1_, &b1_, pad)));
    h = tensor::maxpool1d(tensor::relu(tensor::conv1d(h, k2_, &b2_, pad)));
    return tensor::linear(tensor::reshape(h, {N, flat_}), w_, &b_);
  }

  tensor::ParamList<T> params() const override {
    tensor::ParamList<T> p;
    p.add("conv1.kernel", k1_);
    p.add("conv1.bias", b1_);
    p.add("conv2.kernel", k2_);
    p.add("conv2.bias", b2_);
    p.add("fc.weight", w_);
    p.add("fc.bias", b_);
    return p;
  }
  std::size_t input_dim() const override { return length_; }
  std::size_t classes() const override { return cfg_.classes; }

  tensor::Tensor<T>& first_kernel() { return k1_; }
  tensor::Tensor<T>& fc_weight() { return w_; }
  tensor::Tensor<T>& fc_bias() { return b_; }

 private:
  JustoLiuConfig cfg_;
  std::size_t length_, flat_ = 0;
  tensor::Tensor<T> k1_, b1_, k2_, b2_, w_, b_;
};

}  // namespace hsx
