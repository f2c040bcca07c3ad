#pragma once

namespace wpc {
inline constexpr const char* kVersion = "1.0.0";
}
