#pragma once

namespace cprobe {
inline constexpr const char* version = "0.1.0";
}
