#pragma once

namespace slrcmi {

inline constexpr const char* kVersion = "slrcmi 1.0.0";

}  // namespace slrcmi
