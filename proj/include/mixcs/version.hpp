#pragma once

namespace mixcs {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace mixcs
