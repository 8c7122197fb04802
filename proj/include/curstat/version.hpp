#pragma once

namespace curstat {

inline constexpr const char* kVersion = "0.1.0";

// bumped whenever the run-manifest / config key set changes shape
inline constexpr int kConfigSchemaVersion = 1;

}  // namespace curstat
