#pragma once

namespace libiq {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace libiq
