#pragma once

namespace avphon {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace avphon
