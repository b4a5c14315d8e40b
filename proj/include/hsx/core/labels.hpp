#pragma once

#include <cstdint>

namespace hsx {

/// Label id excluded from losses and metrics.
inline constexpr std::uint16_t kIgnoreLabel = 65535;

}  // namespace hsx
