#pragma once

// HyperCube and its HSCB binary file format.
//
// HSCB layout (little-endian):
//   "HSCB" | u32 version=1 | u32 H | u32 W | u32 C | u8 has_labels | 3 pad bytes
//   | C x f32 wavelengths (nm) | H*W*C x f32 reflectance, pixel-interleaved
//   | (if has_labels) H*W x u16 labels, row-major

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hsx/core/bytes.hpp"
#include "hsx/core/hash.hpp"
#include "hsx/core/labels.hpp"
#include "hsx/spectral/wavelength.hpp"

namespace hsx {

inline constexpr std::uint32_t kCubeVersion = 1;

struct HyperCube {
  std::size_t height = 0;
  std::size_t width = 0;
  WavelengthGrid grid;
  std::vector<float> reflectance;  // H*W*C, all bands of a pixel contiguous
  std::optional<std::vector<std::uint16_t>> labels;

  std::size_t bands() const { return grid.size(); }
  std::size_t pixels() const { return height * width; }

  std::span<const float> pixel(std::size_t row, std::size_t col) const {
    return std::span(reflectance).subspan((row * width + col) * bands(), bands());
  }
  std::span<const float> pixel(std::size_t index) const {
    return std::span(reflectance).subspan(index * bands(), bands());
  }

  /// Throws a data error if extents, grid or labels are inconsistent.
  /// With `classes` set, labels must lie in [0, classes) or equal the ignore id.
  void validate(std::optional<std::size_t> classes = std::nullopt) const {
    if (height == 0 || width == 0) throw Error(ErrorKind::Data, "cube has an empty spatial extent");
    if (auto why = WavelengthGrid::problem(grid.values()); !why.empty())
      throw Error(ErrorKind::Data, "cube wavelength grid: " + why);
    if (reflectance.size() != pixels() * bands())
      throw Error(ErrorKind::Data, "reflectance length " + std::to_string(reflectance.size()) +
                                       " != H*W*C = " + std::to_string(pixels() * bands()));
    if (labels) {
      if (labels->size() != pixels()) throw Error(ErrorKind::Data, "label plane size does not match H*W");
      if (classes)
        for (auto l : *labels)
          if (l != kIgnoreLabel && l >= *classes)
            throw Error(ErrorKind::Data, "label " + std::to_string(l) + " outside [0, " +
                                             std::to_string(*classes) + ")");
    }
  }
};

inline std::vector<std::uint8_t> encode_cube(const HyperCube& cube) {
  cube.validate();
  ByteWriter w;
  w.magic("HSCB");
  w.u32(kCubeVersion);
  w.u32(static_cast<std::uint32_t>(cube.height));
  w.u32(static_cast<std::uint32_t>(cube.width));
  w.u32(static_cast<std::uint32_t>(cube.bands()));
  w.u8(cube.labels ? 1 : 0);
  w.zeros(3);
  w.f32s(cube.grid.values());
  w.f32s(cube.reflectance);
  if (cube.labels) w.u16s(*cube.labels);
  return w.take();
}

inline HyperCube decode_cube(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  r.expect_magic("HSCB", "hyperspectral cube");
  const auto version_at = r.offset();
  const auto version = r.u32();
  if (version != kCubeVersion)
    throw FormatError("unsupported HSCB version " + std::to_string(version), version_at);
  const auto extents_at = r.offset();
  HyperCube cube;
  cube.height = r.u32();
  cube.width = r.u32();
  const std::size_t C = r.u32();
  if (cube.height == 0 || cube.width == 0 || C == 0) throw FormatError("zero cube extent", extents_at);
  const auto flag_at = r.offset();
  const auto has_labels = r.u8();
  if (has_labels > 1) throw FormatError("has_labels flag must be 0 or 1", flag_at);
  r.skip(3);
  const auto grid_at = r.offset();
  std::vector<float> nm(C);
  r.f32s(nm);
  if (auto why = WavelengthGrid::problem(nm); !why.empty()) throw FormatError("invalid wavelength grid: " + why, grid_at);
  cube.grid = WavelengthGrid(std::move(nm));
  const std::size_t n = cube.height * cube.width * C;
  r.require(n * sizeof(float), "reflectance");
  cube.reflectance.resize(n);
  r.f32s(cube.reflectance);
  if (has_labels) {
    cube.labels.emplace(cube.height * cube.width);
    r.u16s(*cube.labels);
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes after cube payload", r.offset());
  return cube;
}

inline void write_cube(const HyperCube& cube, const std::string& path) { write_file_bytes(path, encode_cube(cube)); }

inline HyperCube read_cube(const std::string& path) {
  auto bytes = read_file_bytes(path);
  return decode_cube(bytes);
}

/// Hash of the canonical HSCB encoding.
inline Digest cube_content_hash(const HyperCube& cube) { return sha256(encode_cube(cube)); }

/// Sensor geometry of a benchmark dataset (image size, band count, range).
struct SensorGeometry {
  std::string name;
  std::size_t height, width, bands;
  double first_nm, last_nm;
};

inline const std::vector<SensorGeometry>& reference_geometries() {
  static const std::vector<SensorGeometry> g = {
      {"hyko2", 254, 510, 15, 470.0, 630.0},
      {"hcv", 1400, 1800, 128, 450.0, 950.0},
      {"hsidrive", 409, 216, 25, 600.0, 975.0},
  };
  return g;
}

/// True when the cube's spectral grid spans the geometry's band count and
/// range (within 1 nm); with `check_size` the spatial extent must match too.
inline bool matches_geometry(const HyperCube& cube, const SensorGeometry& g, bool check_size = true) {
  if (cube.bands() != g.bands) return false;
  if (std::abs(cube.grid.front() - g.first_nm) > 1.0 || std::abs(cube.grid.back() - g.last_nm) > 1.0) return false;
  return !check_size || (cube.height == g.height && cube.width == g.width);
}

}  // namespace hsx
