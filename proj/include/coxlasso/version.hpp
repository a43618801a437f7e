#pragma once

namespace coxlasso {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace coxlasso
