#pragma once

namespace h2reuse {

inline constexpr const char* kToolVersion = "1.0.0";

}  // namespace h2reuse
