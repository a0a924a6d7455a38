#pragma once

namespace cann {

inline constexpr const char* kVersion = "0.1.0";

} // namespace cann
