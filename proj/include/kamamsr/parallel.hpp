#pragma once

#include <cstdint>

namespace kamamsr {

// Selects the serial reference loop or the OpenMP loop for the
// embarrassingly parallel drivers (EM restarts, calibration trials,
// weight draws). Both produce bit-identical results.
enum class Execution { Serial, Parallel };

// SplitMix64 finalizer over (seed, stream). Every independent unit of
// work draws from its own stream so results do not depend on schedule.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Number of OpenMP threads available (1 when built without OpenMP).
int max_threads();

}  // namespace kamamsr
