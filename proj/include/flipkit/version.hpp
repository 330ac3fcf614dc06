#pragma once

#include <string_view>

namespace flipkit {

inline constexpr std::string_view kToolName = "flipkit";
inline constexpr std::string_view kVersion = "0.1.0";

}  // namespace flipkit
