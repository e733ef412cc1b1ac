#pragma once

namespace patchcue {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace patchcue
