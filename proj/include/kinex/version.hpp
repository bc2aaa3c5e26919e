#pragma once

namespace kinex {

inline constexpr const char* kProjectName = "kinex";
inline constexpr const char* kVersion = "0.1.0";

} // namespace kinex
