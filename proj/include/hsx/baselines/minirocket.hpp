#pragma once

// MiniROCKET random-kernel features and the HDC positional variant.
//
// Kernel bank: the 84 length-9 kernels with three weights of 2 and six of -1.
// Dilations are spread log-uniformly up to the input length; each (dilation,
// kernel) pair owns a run of biases taken as quantiles of the convolution of a
// random training spectrum. A feature is the proportion of positive values
// (PPV) of conv - bias over all positions of the zero-padded convolution.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "hsx/core/container.hpp"
#include "hsx/core/rng.hpp"

namespace hsx {

inline constexpr std::size_t kRocketKernels = 84;
inline constexpr std::size_t kRocketLength = 9;
inline constexpr std::size_t kRocketMaxDilations = 32;
inline constexpr std::uint32_t kRocketVersion = 1;

/// Indices of the three "2" weights of each kernel, lexicographic order.
inline const std::array<std::array<std::uint8_t, 3>, kRocketKernels>& rocket_kernel_indices() {
  static const auto table = [] {
    std::array<std::array<std::uint8_t, 3>, kRocketKernels> t{};
    std::size_t k = 0;
    for (std::uint8_t a = 0; a < 9; ++a)
      for (std::uint8_t b = a + 1; b < 9; ++b)
        for (std::uint8_t c = b + 1; c < 9; ++c) t[k++] = {a, b, c};
    return t;
  }();
  return table;
}

/// Weight vector of kernel k: -1 everywhere, 2 at its three indices.
inline std::array<double, kRocketLength> rocket_kernel(std::size_t k) {
  std::array<double, kRocketLength> w;
  w.fill(-1.0);
  for (auto i : rocket_kernel_indices().at(k)) w[i] = 2.0;
  return w;
}

/// Low-discrepancy quantile levels frac(i * golden ratio), i = 1..n.
inline std::vector<double> rocket_quantiles(std::size_t n) {
  const double phi = (std::sqrt(5.0) + 1.0) / 2.0;
  std::vector<double> q(n);
  for (std::size_t i = 0; i < n; ++i) q[i] = std::fmod(static_cast<double>(i + 1) * phi, 1.0);
  return q;
}

/// Linear-interpolation quantile of a sample (sorted in place).
inline double sample_quantile(std::vector<double>& v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

struct HDCConfig {
  double scale = 5.0;
  std::uint64_t seed = 42;

  void validate() const {
    if (!(scale >= 0.0)) throw Error(ErrorKind::Config, "HDC scale must be >= 0");
  }
};

class MiniRocketModel {
 public:
  MiniRocketModel() = default;

  bool fitted() const { return fitted_; }
  std::size_t requested_features() const { return requested_; }
  std::size_t features_per_kernel() const { return requested_ / kRocketKernels; }
  std::size_t feature_count() const { return kRocketKernels * features_per_kernel(); }
  std::size_t input_length() const { return length_; }
  const std::vector<std::uint32_t>& dilations() const { return dilations_; }
  const std::vector<std::uint32_t>& features_per_dilation() const { return per_dilation_; }
  const std::vector<double>& biases() const { return biases_; }
  void set_bias(std::size_t feature, double b) { biases_.at(feature) = b; }

  /// Fits dilations and biases on N training spectra of length C laid out
  /// contiguously. Spectra shorter than 9 are zero-padded to 9.
  static MiniRocketModel fit(std::span<const float> spectra, std::size_t C, std::size_t requested,
                             std::uint64_t seed = 42) {
    if (C == 0 || spectra.empty()) throw Error(ErrorKind::Data, "MiniROCKET needs a non-empty training set");
    if (spectra.size() % C) throw Error(ErrorKind::Data, "training spectra are not a multiple of the band count");
    if (requested < kRocketKernels)
      throw Error(ErrorKind::Config, "MiniROCKET needs at least " + std::to_string(kRocketKernels) + " features");
    MiniRocketModel m;
    m.requested_ = requested;
    m.bands_ = C;
    m.length_ = std::max(C, kRocketLength);
    m.seed_ = seed;
    m.fit_dilations();
    const std::size_t N = spectra.size() / C;
    const auto quantiles = rocket_quantiles(m.feature_count());
    CounterRng rng(seed, stream("minirocket.fit"));
    std::size_t f = 0;
    for (std::size_t di = 0; di < m.dilations_.size(); ++di) {
      for (std::size_t k = 0; k < kRocketKernels; ++k) {
        const auto example = m.padded(spectra.subspan(rng.below(N) * C, C));
        auto conv = m.convolve(example, m.dilations_[di], k);
        for (std::uint32_t j = 0; j < m.per_dilation_[di]; ++j, ++f)
          m.biases_.push_back(sample_quantile(conv, quantiles[f]));
      }
    }
    m.fitted_ = true;
    return m;
  }

  /// PPV features, each in [0, 1].
  std::vector<float> transform(std::span<const float> spectrum) const { return transform_impl(spectrum, nullptr); }

  /// Position-weighted PPV: (1/L) sum_t [conv(t) > bias] cos(s * theta_j * t / (L - 1)).
  std::vector<float> transform_hdc(std::span<const float> spectrum, const HDCConfig& cfg) const {
    cfg.validate();
    const auto theta = hdc_angles(cfg.seed);
    return transform_impl(spectrum, &cfg, &theta);
  }

  /// Base angles theta_j, uniform in (-pi, pi], one per feature.
  std::vector<double> hdc_angles(std::uint64_t seed) const {
    CounterRng rng(seed, stream("hdc.theta"));
    std::vector<double> t(feature_count());
    for (auto& v : t) v = std::numbers::pi - 2.0 * std::numbers::pi * rng.uniform();
    return t;
  }

  /// Batch transform of N spectra -> N x F.
  std::vector<float> transform_batch(std::span<const float> spectra, const HDCConfig* hdc = nullptr) const {
    require_fitted();
    std::vector<double> theta;
    if (hdc) {
      hdc->validate();
      theta = hdc_angles(hdc->seed);
    }
    const std::size_t N = spectra.size() / bands_;
    std::vector<float> out;
    out.reserve(N * feature_count());
    for (std::size_t i = 0; i < N; ++i) {
      auto f = transform_impl(spectra.subspan(i * bands_, bands_), hdc, hdc ? &theta : nullptr);
      out.insert(out.end(), f.begin(), f.end());
    }
    return out;
  }

  /// Zero-extended dilated convolution of kernel k over a padded spectrum.
  std::vector<double> convolve(std::span<const double> x, std::size_t dilation, std::size_t k) const {
    const long L = static_cast<long>(x.size()), half = static_cast<long>(4 * dilation);
    const auto& idx = rocket_kernel_indices()[k];
    std::vector<double> out(x.size());
    for (long t = 0; t < L; ++t) {
      double all = 0, chosen = 0;
      for (long j = 0; j < 9; ++j) {
        const long s = t - half + j * static_cast<long>(dilation);
        if (s < 0 || s >= L) continue;
        const double v = x[static_cast<std::size_t>(s)];
        all += v;
        if (j == idx[0] || j == idx[1] || j == idx[2]) chosen += v;
      }
      out[static_cast<std::size_t>(t)] = 3.0 * chosen - all;
    }
    return out;
  }

  std::vector<double> padded(std::span<const float> spectrum) const {
    if (spectrum.size() != bands_)
      throw Error(ErrorKind::Data, "spectrum has " + std::to_string(spectrum.size()) + " bands, model fitted on " +
                                       std::to_string(bands_));
    std::vector<double> x(length_, 0.0);
    std::copy(spectrum.begin(), spectrum.end(), x.begin());
    return x;
  }

  std::vector<std::uint8_t> payload() const {
    require_fitted();
    ByteWriter w;
    w.u32(static_cast<std::uint32_t>(requested_));
    w.u32(static_cast<std::uint32_t>(bands_));
    w.u64(seed_);
    w.u32(static_cast<std::uint32_t>(dilations_.size()));
    for (std::size_t i = 0; i < dilations_.size(); ++i) {
      w.u32(dilations_[i]);
      w.u32(per_dilation_[i]);
    }
    w.u32(static_cast<std::uint32_t>(biases_.size()));
    for (double b : biases_) w.f64(b);
    return w.take();
  }

  static MiniRocketModel from_payload(PayloadReader& r) {
    MiniRocketModel m;
    const auto at = r.file_offset();
    m.requested_ = r.u32();
    m.bands_ = r.u32();
    m.seed_ = r.u64();
    if (m.requested_ < kRocketKernels || m.bands_ == 0) throw FormatError("invalid MiniROCKET header", at);
    m.length_ = std::max(m.bands_, kRocketLength);
    const auto nd = r.u32();
    std::size_t sum = 0;
    for (std::uint32_t i = 0; i < nd; ++i) {
      m.dilations_.push_back(r.u32());
      m.per_dilation_.push_back(r.u32());
      sum += m.per_dilation_.back();
    }
    const auto nb_at = r.file_offset();
    const auto nb = r.u32();
    if (sum != m.features_per_kernel() || nb != m.feature_count())
      throw FormatError("MiniROCKET bias table does not match its dilations", nb_at);
    r.require(std::size_t{nb} * 8, "bias table");
    for (std::uint32_t i = 0; i < nb; ++i) m.biases_.push_back(r.f64());
    m.fitted_ = true;
    return m;
  }

  bool operator==(const MiniRocketModel&) const = default;

 private:
  void require_fitted() const {
    if (!fitted_) throw Error(ErrorKind::State, "MiniROCKET model used before fit");
  }

  void fit_dilations() {
    const std::size_t per_kernel = features_per_kernel();
    const std::size_t max_dil = std::min(per_kernel, kRocketMaxDilations);
    const double multiplier = static_cast<double>(per_kernel) / static_cast<double>(max_dil);
    const double max_exp = std::log2(static_cast<double>(length_ - 1) / static_cast<double>(kRocketLength - 1));
    for (std::size_t i = 0; i < max_dil; ++i) {
      const double e = max_dil == 1 ? 0.0 : max_exp * static_cast<double>(i) / static_cast<double>(max_dil - 1);
      const auto d = static_cast<std::uint32_t>(std::floor(std::pow(2.0, e) + 1e-9));
      if (dilations_.empty() || dilations_.back() != d) {
        dilations_.push_back(d);
        per_dilation_.push_back(1);
      } else {
        ++per_dilation_.back();
      }
    }
    std::size_t used = 0;
    for (auto& c : per_dilation_) used += c = static_cast<std::uint32_t>(static_cast<double>(c) * multiplier);
    for (std::size_t i = 0; used < per_kernel; i = (i + 1) % per_dilation_.size(), ++used) ++per_dilation_[i];
  }

  std::vector<float> transform_impl(std::span<const float> spectrum, const HDCConfig* hdc,
                                    const std::vector<double>* theta = nullptr) const {
    require_fitted();
    const auto x = padded(spectrum);
    const std::size_t L = x.size();
    std::vector<float> out(feature_count());
    std::vector<double> weight(L, 1.0);
    std::size_t f = 0;
    for (std::size_t di = 0; di < dilations_.size(); ++di)
      for (std::size_t k = 0; k < kRocketKernels; ++k) {
        const auto conv = convolve(x, dilations_[di], k);
        for (std::uint32_t j = 0; j < per_dilation_[di]; ++j, ++f) {
          const double b = biases_[f];
          if (hdc && hdc->scale != 0.0) {
            const double a = hdc->scale * (*theta)[f];
            for (std::size_t t = 0; t < L; ++t)
              weight[t] = std::cos(a * (L > 1 ? static_cast<double>(t) / static_cast<double>(L - 1) : 0.0));
          }
          double acc = 0;
          for (std::size_t t = 0; t < L; ++t)
            if (conv[t] > b) acc += weight[t];
          out[f] = static_cast<float>(acc / static_cast<double>(L));
        }
      }
    return out;
  }

  bool fitted_ = false;
  std::size_t requested_ = 0, bands_ = 0, length_ = 0;
  std::uint64_t seed_ = 42;
  std::vector<std::uint32_t> dilations_, per_dilation_;
  std::vector<double> biases_;
};

inline std::vector<std::uint8_t> encode_rocket(const MiniRocketModel& m) {
  return wrap_container("MRKT", kRocketVersion, m.payload());
}

inline MiniRocketModel decode_rocket(std::span<const std::uint8_t> bytes) {
  auto view = open_container(bytes, "MRKT", kRocketVersion);
  PayloadReader r(view);
  auto m = MiniRocketModel::from_payload(r);
  if (r.remaining()) throw FormatError("trailing bytes in MiniROCKET payload", r.file_offset());
  return m;
}

}  // namespace hsx
