#pragma once
#include <cstdint>

// Master seed of the default desk run (acceptance criteria 5, 7, 8 and the
// trained-model property tests).
inline constexpr std::uint64_t kDeskSeed = 40;
