#pragma once

namespace unravel {

inline constexpr const char* kVersion = "0.1.0";

// Bumped whenever a CSV column set or JSON layout changes incompatibly.
inline constexpr int kSchemaVersion = 1;

}  // namespace unravel
