#pragma once

namespace tessdiff {

inline constexpr const char* kVersion = "1.0.0";

}  // namespace tessdiff
