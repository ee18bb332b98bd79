#pragma once

namespace rebal {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace rebal
