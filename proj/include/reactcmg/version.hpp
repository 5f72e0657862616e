#pragma once

namespace reactcmg {

inline constexpr const char* kVersion = "0.1.0";

} // namespace reactcmg
