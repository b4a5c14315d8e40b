#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "hsx/core/error.hpp"

namespace hsx {

/// Central wavelengths (nm) of a sensor's bands: strictly increasing, inside
/// (200, 3000) nm, at least one band.
class WavelengthGrid {
 public:
  WavelengthGrid() = default;

  explicit WavelengthGrid(std::vector<float> nm) : nm_(std::move(nm)) {
    if (auto why = problem(nm_); !why.empty()) throw Error(ErrorKind::Data, "invalid wavelength grid: " + why);
  }

  /// `count` band centres evenly spaced from `first` to `last` nm inclusive.
  static WavelengthGrid linspace(double first, double last, std::size_t count) {
    std::vector<float> v(count);
    for (std::size_t i = 0; i < count; ++i)
      v[i] = static_cast<float>(count == 1 ? first : first + (last - first) * static_cast<double>(i) /
                                                                 static_cast<double>(count - 1));
    return WavelengthGrid(std::move(v));
  }

  /// Empty string when `nm` is a valid grid, otherwise the reason.
  static std::string problem(const std::vector<float>& nm) {
    if (nm.empty()) return "no bands";
    for (std::size_t i = 0; i < nm.size(); ++i) {
      if (!std::isfinite(nm[i]) || nm[i] <= 200.0f || nm[i] >= 3000.0f)
        return "band " + std::to_string(i) + " at " + std::to_string(nm[i]) + " nm outside (200, 3000)";
      if (i > 0 && !(nm[i] > nm[i - 1]))
        return "band " + std::to_string(i) + " not strictly increasing";
    }
    return {};
  }

  std::size_t size() const { return nm_.size(); }
  float operator[](std::size_t i) const { return nm_[i]; }
  const std::vector<float>& values() const { return nm_; }
  float front() const { return nm_.front(); }
  float back() const { return nm_.back(); }

  /// Nominal band width: spacing of adjacent centres (10 nm for a single band).
  double band_width() const {
    return nm_.size() > 1 ? (static_cast<double>(nm_.back()) - nm_.front()) / static_cast<double>(nm_.size() - 1)
                          : 10.0;
  }

  bool operator==(const WavelengthGrid&) const = default;

 private:
  std::vector<float> nm_;
};

}  // namespace hsx
