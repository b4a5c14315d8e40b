#pragma once

// Synthetic hyperspectral scenes: continuous endmember spectra on a 1 nm grid,
// blob-structured label maps, per-pixel mixing and band integration onto an
// arbitrary sensor grid.

#include <algorithm>
#include <cmath>

#include "hsx/core/rng.hpp"
#include "hsx/data/cube.hpp"

namespace hsx {

inline constexpr double kSpectrumFirstNm = 400.0;
inline constexpr double kSpectrumLastNm = 1000.0;
inline constexpr std::size_t kSpectrumSamples = 601;  // 1 nm spacing

/// A material spectrum sampled at 400, 401, ..., 1000 nm.
using ContinuousSpectrum = std::vector<double>;

inline double spectrum_distance(const ContinuousSpectrum& a, const ContinuousSpectrum& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

/// K spectra, each a base level plus 3-6 Gaussian bumps (centres 400-1000 nm,
/// widths 20-120 nm), clamped to [0, 1]. A candidate closer than
/// `min_distance` (L2 on the 1 nm grid) to an accepted one is redrawn.
inline std::vector<ContinuousSpectrum> generate_endmembers(std::size_t K, std::uint64_t seed,
                                                           double min_distance = 2.0,
                                                           StreamId sid = stream("endmembers")) {
  if (K == 0) throw Error(ErrorKind::Config, "need at least one endmember");
  std::vector<ContinuousSpectrum> out;
  std::uint64_t attempt = 0;
  while (out.size() < K) {
    if (attempt > 1000 * K) throw Error(ErrorKind::Config, "could not place endmembers at the requested distance");
    CounterRng rng(seed, sid.child(attempt++));
    ContinuousSpectrum s(kSpectrumSamples, rng.uniform(0.05, 0.35));
    const auto bumps = 3 + rng.below(4);
    for (std::uint64_t b = 0; b < bumps; ++b) {
      const double centre = rng.uniform(kSpectrumFirstNm, kSpectrumLastNm);
      const double width = rng.uniform(20.0, 120.0);
      const double amp = rng.uniform(-0.3, 0.6);
      for (std::size_t i = 0; i < kSpectrumSamples; ++i) {
        const double z = (kSpectrumFirstNm + static_cast<double>(i) - centre) / width;
        s[i] += amp * std::exp(-0.5 * z * z);
      }
    }
    for (auto& v : s) v = std::clamp(v, 0.0, 1.0);
    const bool far = std::all_of(out.begin(), out.end(),
                                 [&](const auto& o) { return spectrum_distance(o, s) >= min_distance; });
    if (far) out.push_back(std::move(s));
  }
  return out;
}

/// Mean of a continuous spectrum over each band [centre - w/2, centre + w/2],
/// with w the grid's band spacing. Linear interpolation between 1 nm samples.
inline std::vector<double> integrate_bands(const ContinuousSpectrum& s, const WavelengthGrid& grid) {
  auto at = [&](double nm) {
    const double x = std::clamp(nm, kSpectrumFirstNm, kSpectrumLastNm) - kSpectrumFirstNm;
    const auto i = std::min<std::size_t>(static_cast<std::size_t>(x), kSpectrumSamples - 2);
    const double f = x - static_cast<double>(i);
    return s[i] * (1 - f) + s[i + 1] * f;
  };
  const double w = grid.band_width();
  const auto n = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(w)));
  std::vector<double> out(grid.size());
  for (std::size_t c = 0; c < grid.size(); ++c) {
    double acc = 0;
    for (std::size_t k = 0; k < n; ++k)
      acc += at(grid[c] - w / 2 + w * (static_cast<double>(k) + 0.5) / static_cast<double>(n));
    out[c] = acc / static_cast<double>(n);
  }
  return out;
}

struct SyntheticSceneSpec {
  std::size_t classes = 5;
  std::size_t height = 32;
  std::size_t width = 32;
  WavelengthGrid grid = WavelengthGrid::linspace(470, 630, 15);
  double smoothness = 3.0;     // Gaussian blur sigma of the label fields, pixels
  double noise = 0.02;         // per-band Gaussian noise sigma
  double jitter = 0.2;         // max abundance of the contaminating endmember
  double imbalance = 0.6;      // spread of the per-class field offsets
  double ignore_margin = 0.0;  // pixels whose top-two fields differ by less are labelled 65535
  std::uint64_t seed = 42;
  std::vector<ContinuousSpectrum> endmembers;  // empty: drawn from `seed`

  void validate() const {
    if (classes < 2) throw Error(ErrorKind::Config, "a scene needs at least two classes");
    if (height == 0 || width == 0) throw Error(ErrorKind::Config, "scene extent must be positive");
    if (noise < 0 || jitter < 0 || jitter > 1 || smoothness < 0 || ignore_margin < 0)
      throw Error(ErrorKind::Config, "scene noise, jitter, smoothness and margin must be non-negative");
    if (!endmembers.empty() && endmembers.size() != classes)
      throw Error(ErrorKind::Config, "endmember count does not match class count");
    if (auto why = WavelengthGrid::problem(grid.values()); !why.empty())
      throw Error(ErrorKind::Config, "scene grid: " + why);
  }
};

namespace detail {

// Separable Gaussian blur with mirrored borders, in place.
inline void blur(std::vector<double>& f, std::size_t H, std::size_t W, double sigma) {
  if (sigma <= 0) return;
  const long r = static_cast<long>(std::ceil(3 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * r + 1));
  double ks = 0;
  for (long i = -r; i <= r; ++i) ks += k[static_cast<std::size_t>(i + r)] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (auto& v : k) v /= ks;
  auto mirror = [](long i, long n) {
    if (n == 1) return 0L;
    const long p = 2 * (n - 1);
    i = ((i % p) + p) % p;
    return i < n ? i : p - i;
  };
  std::vector<double> tmp(f.size());
  const long h = static_cast<long>(H), w = static_cast<long>(W);
  for (long y = 0; y < h; ++y)
    for (long x = 0; x < w; ++x) {
      double s = 0;
      for (long d = -r; d <= r; ++d) s += k[static_cast<std::size_t>(d + r)] * f[static_cast<std::size_t>(y * w + mirror(x + d, w))];
      tmp[static_cast<std::size_t>(y * w + x)] = s;
    }
  for (long y = 0; y < h; ++y)
    for (long x = 0; x < w; ++x) {
      double s = 0;
      for (long d = -r; d <= r; ++d) s += k[static_cast<std::size_t>(d + r)] * tmp[static_cast<std::size_t>(mirror(y + d, h) * w + x)];
      f[static_cast<std::size_t>(y * w + x)] = s;
    }
}

}  // namespace detail

/// Label map of a scene: argmax over K blurred noise fields with decreasing
/// per-class offsets, so class priors are uneven. Independent of the grid.
inline std::vector<std::uint16_t> generate_label_map(const SyntheticSceneSpec& spec) {
  const std::size_t H = spec.height, W = spec.width, K = spec.classes;
  std::vector<std::vector<double>> fields(K);
  for (std::size_t k = 0; k < K; ++k) {
    CounterRng rng(spec.seed, stream("scene.labels").child(k));
    auto& f = fields[k];
    f.resize(H * W);
    for (auto& v : f) v = rng.normal();
    detail::blur(f, H, W, spec.smoothness);
    double m = 0, sq = 0;
    for (auto v : f) m += v;
    m /= static_cast<double>(f.size());
    for (auto v : f) sq += (v - m) * (v - m);
    const double sd = std::sqrt(sq / static_cast<double>(f.size()));
    const double offset = spec.imbalance * (1.0 - 2.0 * static_cast<double>(k) / static_cast<double>(K - 1));
    for (auto& v : f) v = (sd > 0 ? (v - m) / sd : 0.0) + offset;
  }
  std::vector<std::uint16_t> labels(H * W);
  for (std::size_t p = 0; p < H * W; ++p) {
    std::size_t best = 0;
    double top = -1e300, second = -1e300;
    for (std::size_t k = 0; k < K; ++k) {
      const double v = fields[k][p];
      if (v > top) {
        second = top;
        top = v;
        best = k;
      } else if (v > second) {
        second = v;
      }
    }
    labels[p] = top - second < spec.ignore_margin ? kIgnoreLabel : static_cast<std::uint16_t>(best);
  }
  return labels;
}

/// Labelled cube. A pixel of class k is
///   brightness * ((1 - a) E_k + a E_j) band-integrated, plus per-band noise,
/// with a ~ U(0, jitter), j a random class, brightness ~ 1 + jitter * U(-0.5, 0.5),
/// clamped to [0, 1]. Ignored pixels still carry the spectrum of their argmax class.
inline HyperCube generate_scene(const SyntheticSceneSpec& spec) {
  spec.validate();
  const std::size_t H = spec.height, W = spec.width, K = spec.classes, C = spec.grid.size();
  const auto endmembers = spec.endmembers.empty() ? generate_endmembers(K, spec.seed) : spec.endmembers;
  std::vector<std::vector<double>> band_means;
  for (const auto& e : endmembers) band_means.push_back(integrate_bands(e, spec.grid));

  auto labels = generate_label_map(spec);
  // The material of an ignored pixel: argmax class without the margin rule.
  std::vector<std::uint16_t> material = labels;
  if (spec.ignore_margin > 0) {
    auto s = spec;
    s.ignore_margin = 0;
    material = generate_label_map(s);
  }

  HyperCube cube;
  cube.height = H;
  cube.width = W;
  cube.grid = spec.grid;
  cube.reflectance.resize(H * W * C);
  for (std::size_t p = 0; p < H * W; ++p) {
    CounterRng rng(spec.seed, stream("scene.pixels").child(p));
    const auto& own = band_means[material[p]];
    const auto& other = band_means[rng.below(K)];
    const double a = spec.jitter * rng.uniform();
    const double bright = 1.0 + spec.jitter * (rng.uniform() - 0.5);
    for (std::size_t c = 0; c < C; ++c) {
      double v = bright * ((1 - a) * own[c] + a * other[c]);
      if (spec.noise > 0) v += rng.normal(0.0, spec.noise);
      cube.reflectance[p * C + c] = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  }
  cube.labels = std::move(labels);
  return cube;
}

}  // namespace hsx
