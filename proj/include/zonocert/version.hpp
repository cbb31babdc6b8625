#pragma once

namespace zonocert {

inline constexpr const char* kVersion = "0.1.0";

} // namespace zonocert
