#pragma once

// U-Net family used for segmentation. The same class covers the vanilla
// U-Net on raw channels, the regularised RU-Net (batch norm + dropout) and the
// RU-Net behind a 1x1 neck that consumes frozen backbone features.

#include "hsx/core/container.hpp"
#include "hsx/tensor/conv.hpp"
#include "hsx/tensor/nn.hpp"

namespace hsx {

struct NeckConfig {
  std::size_t in_dim = 32;
  std::size_t out_channels = 16;

  void validate() const {
    if (in_dim == 0 || out_channels == 0) throw Error(ErrorKind::Config, "neck extents must be positive");
  }
};

struct RUNetConfig {
  std::size_t depth = 2;
  std::size_t base_channels = 16;
  double dropout = 0.2;
  bool batch_norm = true;

  void validate() const {
    if (depth == 0) throw Error(ErrorKind::Config, "U-Net depth must be >= 1");
    if (base_channels == 0) throw Error(ErrorKind::Config, "U-Net base channels must be positive");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw Error(ErrorKind::Config, "dropout must lie in [0, 1)");
  }

  /// The from-scratch baseline: same topology, no dropout.
  static RUNetConfig vanilla() { return {2, 16, 0.0, true}; }
};

template <class T>
struct ConvUnit {
  tensor::Tensor<T> kernel, bias, gamma, beta;
  tensor::BatchNormStats<T> stats;
};

template <class T>
class UNet {
 public:
  UNet() = default;

  /// `in_channels` raw channels, or the backbone dimension when a neck is used.
  UNet(std::size_t in_channels, std::size_t classes, RUNetConfig cfg, std::optional<NeckConfig> neck,
       std::uint64_t seed = 42)
      : cfg_(cfg), neck_cfg_(neck), in_(in_channels), classes_(classes), seed_(seed) {
    cfg_.validate();
    if (classes < 2) throw Error(ErrorKind::Config, "segmentation needs at least two classes");
    if (in_channels == 0) throw Error(ErrorKind::Config, "input channel count must be positive");
    CounterRng rng(seed, stream("unet.init"));
    std::size_t c = in_channels;
    if (neck_cfg_) {
      neck_cfg_->validate();
      if (neck_cfg_->in_dim != in_channels)
        throw Error(ErrorKind::Config, "neck input dim " + std::to_string(neck_cfg_->in_dim) +
                                           " does not match feature dim " + std::to_string(in_channels));
      neck_k_ = he_kernel(rng, 1, c, neck_cfg_->out_channels);
      neck_b_ = tensor::Tensor<T>({neck_cfg_->out_channels}, T(0), true);
      c = neck_cfg_->out_channels;
    }
    std::vector<std::size_t> widths;
    for (std::size_t l = 0; l <= cfg_.depth; ++l) widths.push_back(cfg_.base_channels << l);
    for (std::size_t l = 0; l < cfg_.depth; ++l) {
      down_.push_back({unit(rng, c, widths[l]), unit(rng, widths[l], widths[l])});
      c = widths[l];
    }
    bottom_ = {unit(rng, c, widths[cfg_.depth]), unit(rng, widths[cfg_.depth], widths[cfg_.depth])};
    c = widths[cfg_.depth];
    for (std::size_t l = cfg_.depth; l-- > 0;) {
      up_.push_back({unit(rng, c + widths[l], widths[l]), unit(rng, widths[l], widths[l])});
      c = widths[l];
    }
    out_k_ = he_kernel(rng, 1, c, classes);
    out_b_ = tensor::Tensor<T>({classes}, T(0), true);
  }

  const RUNetConfig& config() const { return cfg_; }
  const std::optional<NeckConfig>& neck() const { return neck_cfg_; }
  std::size_t in_channels() const { return in_; }
  std::size_t classes() const { return classes_; }
  std::size_t multiple() const { return std::size_t{1} << cfg_.depth; }

  tensor::ParamList<T> neck_params() const {
    tensor::ParamList<T> p;
    if (neck_cfg_) {
      p.add("neck.kernel", neck_k_);
      p.add("neck.bias", neck_b_);
    }
    return p;
  }

  /// Trainable weights (neck first, then the encoder-decoder).
  tensor::ParamList<T> params() const {
    auto p = neck_params();
    visit_units([&](const std::string& name, const ConvUnit<T>& u) {
      p.add(name + ".kernel", u.kernel);
      p.add(name + ".bias", u.bias);
      if (cfg_.batch_norm) {
        p.add(name + ".gamma", u.gamma);
        p.add(name + ".beta", u.beta);
      }
    });
    p.add("out.kernel", out_k_);
    p.add("out.bias", out_b_);
    return p;
  }

  /// Batch-norm running statistics, stored alongside the weights.
  std::vector<StoredArray> buffers() const {
    std::vector<StoredArray> out;
    if (!cfg_.batch_norm) return out;
    visit_units([&](const std::string&, const ConvUnit<T>& u) {
      out.push_back(to_array(u.stats.mean));
      out.push_back(to_array(u.stats.var));
    });
    return out;
  }

  void set_buffers(const std::vector<StoredArray>& b) {
    if (!cfg_.batch_norm) {
      if (!b.empty()) throw Error(ErrorKind::Format, "unexpected batch-norm statistics");
      return;
    }
    std::size_t i = 0;
    visit_units_mut([&](ConvUnit<T>& u) {
      if (i + 2 > b.size() || b[i].data.size() != u.stats.mean.size() || b[i + 1].data.size() != u.stats.var.size())
        throw Error(ErrorKind::Format, "batch-norm statistics do not match the model");
      u.stats.mean.assign(b[i].data.begin(), b[i].data.end());
      u.stats.var.assign(b[i + 1].data.begin(), b[i + 1].data.end());
      i += 2;
    });
    if (i != b.size()) throw Error(ErrorKind::Format, "batch-norm statistics do not match the model");
  }

  /// x: [N x H x W x Cin] -> logits [N x H x W x K]. H and W must be multiples
  /// of 2^depth. `call` selects the dropout stream of this invocation.
  tensor::Tensor<T> forward(const tensor::Tensor<T>& x, bool train, std::uint64_t call = 0) {
    if (x.rank() != 4 || x.dim(3) != in_)
      throw Error(ErrorKind::Dimension, "U-Net input " + tensor::shape_str(x.shape()) + " vs " +
                                            std::to_string(in_) + " channels");
    if (x.dim(1) % multiple() || x.dim(2) % multiple())
      throw Error(ErrorKind::Shape, "spatial extent " + std::to_string(x.dim(1)) + "x" + std::to_string(x.dim(2)) +
                                        " is not divisible by " + std::to_string(multiple()));
    const StreamId drop = stream("unet.dropout").child(call);
    std::size_t unit_id = 0;
    auto block = [&](tensor::Tensor<T> h, std::array<ConvUnit<T>, 2>& units) {
      for (auto& u : units) {
        h = tensor::conv2d(h, u.kernel, &u.bias);
        if (cfg_.batch_norm) h = tensor::batch_norm(h, u.gamma, u.beta, u.stats, train);
        h = tensor::relu(h);
        h = tensor::dropout(h, static_cast<T>(cfg_.dropout), train, seed_, drop.child(unit_id++));
      }
      return h;
    };
    auto h = x;
    if (neck_cfg_) h = tensor::conv2d(h, neck_k_, &neck_b_);
    std::vector<tensor::Tensor<T>> skips;
    for (auto& level : down_) {
      h = block(h, level);
      skips.push_back(h);
      h = tensor::maxpool2d(h);
    }
    h = block(h, bottom_);
    for (auto& level : up_) {
      h = tensor::concat_last(tensor::upsample2x(h), skips.back());
      skips.pop_back();
      h = block(h, level);
    }
    return tensor::conv2d(h, out_k_, &out_b_);
  }

 private:
  static tensor::Tensor<T> he_kernel(CounterRng& rng, std::size_t k, std::size_t in, std::size_t out) {
    const double sd = std::sqrt(2.0 / static_cast<double>(k * k * in));
    std::vector<T> v(k * k * in * out);
    for (auto& x : v) x = static_cast<T>(rng.normal(0.0, sd));
    return tensor::Tensor<T>({k, k, in, out}, std::move(v), true);
  }

  ConvUnit<T> unit(CounterRng& rng, std::size_t in, std::size_t out) const {
    ConvUnit<T> u;
    u.kernel = he_kernel(rng, 3, in, out);
    u.bias = tensor::Tensor<T>({out}, T(0), true);
    u.gamma = tensor::Tensor<T>({out}, T(1), true);
    u.beta = tensor::Tensor<T>({out}, T(0), true);
    u.stats.mean.assign(out, T(0));
    u.stats.var.assign(out, T(1));
    return u;
  }

  static StoredArray to_array(const std::vector<T>& v) {
    return {{v.size()}, std::vector<float>(v.begin(), v.end())};
  }

  template <class F>
  void visit_units(F&& f) const {
    for (std::size_t l = 0; l < down_.size(); ++l)
      for (std::size_t i = 0; i < 2; ++i) f("down" + std::to_string(l) + "." + std::to_string(i), down_[l][i]);
    for (std::size_t i = 0; i < 2; ++i) f("bottom." + std::to_string(i), bottom_[i]);
    for (std::size_t l = 0; l < up_.size(); ++l)
      for (std::size_t i = 0; i < 2; ++i) f("up" + std::to_string(l) + "." + std::to_string(i), up_[l][i]);
  }

  template <class F>
  void visit_units_mut(F&& f) {
    for (auto& level : down_)
      for (auto& u : level) f(u);
    for (auto& u : bottom_) f(u);
    for (auto& level : up_)
      for (auto& u : level) f(u);
  }

  RUNetConfig cfg_;
  std::optional<NeckConfig> neck_cfg_;
  std::size_t in_ = 0, classes_ = 0;
  std::uint64_t seed_ = 42;
  tensor::Tensor<T> neck_k_, neck_b_;
  std::vector<std::array<ConvUnit<T>, 2>> down_, up_;
  std::array<ConvUnit<T>, 2> bottom_;
  tensor::Tensor<T> out_k_, out_b_;
};

/// Reflect-pads an [H x W x C] map up to multiples of `m` (bottom/right).
template <class V>
std::vector<V> reflect_pad(std::span<const V> x, std::size_t H, std::size_t W, std::size_t C, std::size_t m,
                           std::size_t& Hp, std::size_t& Wp) {
  Hp = (H + m - 1) / m * m;
  Wp = (W + m - 1) / m * m;
  auto reflect = [](std::size_t i, std::size_t n) {
    if (n == 1) return std::size_t{0};
    const std::size_t period = 2 * (n - 1);
    i %= period;
    return i < n ? i : period - i;
  };
  std::vector<V> out(Hp * Wp * C);
  for (std::size_t i = 0; i < Hp; ++i)
    for (std::size_t j = 0; j < Wp; ++j)
      std::copy_n(x.data() + (reflect(i, H) * W + reflect(j, W)) * C, C, out.data() + (i * Wp + j) * C);
  return out;
}

/// Inverse of reflect_pad: keeps the top-left H x W window.
template <class V>
std::vector<V> crop(std::span<const V> x, std::size_t Hp, std::size_t Wp, std::size_t C, std::size_t H,
                    std::size_t W) {
  (void)Hp;
  std::vector<V> out(H * W * C);
  for (std::size_t i = 0; i < H; ++i) std::copy_n(x.data() + i * Wp * C, W * C, out.data() + i * W * C);
  return out;
}

}  // namespace hsx
