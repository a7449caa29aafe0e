#pragma once

namespace hopforge {

inline constexpr const char* kToolName = "hopforge";
inline constexpr const char* kVersion = "0.1.0";

} // namespace hopforge
