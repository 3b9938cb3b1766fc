#pragma once

namespace segrank {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace segrank
