#pragma once

namespace nvcool {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace nvcool
