#pragma once

namespace hdclt {

inline constexpr const char* kVersion = "0.1.0";

// Identity string of the counter-based generator, echoed into reports so a
// stored report pins the exact stream definition it was produced with.
inline constexpr const char* kRngId = "philox4x32-10";

}  // namespace hdclt
