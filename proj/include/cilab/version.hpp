#pragma once

namespace cilab {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace cilab
