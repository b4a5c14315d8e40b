#pragma once

// Pseudo-RGB projection of a hyperspectral cube.
//
// cie:      each pixel spectrum weighted by Gaussian stand-ins for the three
//           colour-matching curves (peaks 600/550/450 nm, sigma 40 nm) over
//           the bands inside 380-780 nm, then divided by the cube maximum.
// tri-band: band indices split into three contiguous thirds, each averaged.
// cie falls back to tri-band when fewer than 3 bands lie in 380-780 nm or
// when one of the three peaks has no band within sigma of it.
//
// Output channels are ordered by increasing wavelength (B, G, R) so the
// result is itself a valid cube on the grid {450, 550, 600} nm.

#include <algorithm>
#include <cmath>

#include "hsx/data/cube.hpp"

namespace hsx {

enum class ProjectionMethod { Cie, TriBand };

inline const char* to_string(ProjectionMethod m) { return m == ProjectionMethod::Cie ? "cie" : "tri-band"; }

inline ProjectionMethod parse_projection(std::string_view s) {
  if (s == "cie") return ProjectionMethod::Cie;
  if (s == "tri-band") return ProjectionMethod::TriBand;
  throw Error(ErrorKind::Config, "unknown projection method '" + std::string(s) + "'");
}

struct ProjectionSpec {
  ProjectionMethod method = ProjectionMethod::Cie;
  double clamp_min = 0.0, clamp_max = 1.0;
};

struct Projection {
  HyperCube image;  // C = 3
  ProjectionMethod method_used = ProjectionMethod::Cie;
};

inline const WavelengthGrid& prgb_grid() {
  static const WavelengthGrid g(std::vector<float>{450.0f, 550.0f, 600.0f});
  return g;
}

inline std::size_t visible_band_count(const WavelengthGrid& g) {
  return static_cast<std::size_t>(
      std::count_if(g.values().begin(), g.values().end(), [](float nm) { return nm >= 380.0f && nm <= 780.0f; }));
}

/// True when the grid supports the cie projection.
inline bool cie_supported(const WavelengthGrid& g) {
  if (visible_band_count(g) < 3) return false;
  for (double peak : {450.0, 550.0, 600.0}) {
    const bool near = std::any_of(g.values().begin(), g.values().end(),
                                  [&](float nm) { return std::fabs(nm - peak) <= 40.0; });
    if (!near) return false;
  }
  return true;
}

/// Start index of third i (0..3) of C bands.
inline std::size_t third_start(std::size_t i, std::size_t C) { return i * C / 3; }

inline Projection project_prgb(const HyperCube& cube, const ProjectionSpec& spec = {}) {
  const std::size_t C = cube.bands(), P = cube.pixels();
  if (C < 3) throw Error(ErrorKind::Data, "pRGB projection needs at least 3 bands, cube has " + std::to_string(C));
  Projection out;
  out.method_used = spec.method;
  if (spec.method == ProjectionMethod::Cie && !cie_supported(cube.grid))
    out.method_used = ProjectionMethod::TriBand;

  std::vector<double> rgb(P * 3, 0.0);  // B, G, R
  if (out.method_used == ProjectionMethod::TriBand) {
    for (std::size_t p = 0; p < P; ++p) {
      const auto px = cube.pixel(p);
      for (std::size_t ch = 0; ch < 3; ++ch) {
        const std::size_t a = third_start(ch, C), b = third_start(ch + 1, C);
        double s = 0;
        for (std::size_t c = a; c < b; ++c) s += px[c];
        rgb[p * 3 + ch] = s / static_cast<double>(b - a);
      }
    }
  } else {
    constexpr std::array<double, 3> peaks{450.0, 550.0, 600.0};
    std::array<std::vector<double>, 3> w;
    for (std::size_t ch = 0; ch < 3; ++ch) {
      w[ch].assign(C, 0.0);
      for (std::size_t c = 0; c < C; ++c) {
        const double nm = cube.grid[c];
        if (nm < 380.0 || nm > 780.0) continue;
        const double z = (nm - peaks[ch]) / 40.0;
        w[ch][c] = std::exp(-0.5 * z * z);
      }
    }
    double peak = 0;
    for (std::size_t p = 0; p < P; ++p) {
      const auto px = cube.pixel(p);
      for (std::size_t ch = 0; ch < 3; ++ch) {
        double s = 0;
        for (std::size_t c = 0; c < C; ++c) s += w[ch][c] * px[c];
        rgb[p * 3 + ch] = s;
        peak = std::max(peak, s);
      }
    }
    if (peak > 0)
      for (auto& v : rgb) v /= peak;
  }

  out.image.height = cube.height;
  out.image.width = cube.width;
  out.image.grid = prgb_grid();
  out.image.labels = cube.labels;
  out.image.reflectance.resize(P * 3);
  for (std::size_t i = 0; i < rgb.size(); ++i)
    out.image.reflectance[i] = static_cast<float>(std::clamp(rgb[i], spec.clamp_min, spec.clamp_max));
  return out;
}

}  // namespace hsx
