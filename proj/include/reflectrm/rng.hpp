#pragma once

// Scheduling-independent randomness. Every random draw is keyed by
// (run seed, instance id, stream, index) so concurrent execution order never
// changes an outcome.

#include <cstdint>
#include <random>
#include <string_view>

namespace reflectrm {

enum class RngStream : std::uint64_t {
  kReflectionOrder = 1,
  kRandomAnchor = 2,
  kRandomWinners = 3,
  kPrefSample = 4,
  kReflPairing = 5,
  kMixShuffle = 6,
  kDownsample = 7,
  kSubsample = 8,
};

/// One step of SplitMix64; advances state and returns the mixed output.
std::uint64_t splitmix64(std::uint64_t& state);

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes);

std::uint64_t derive_seed(std::uint64_t base_seed, std::string_view key, RngStream stream, std::uint64_t index);

inline std::mt19937_64 keyed_engine(std::uint64_t base_seed, std::string_view key, RngStream stream,
                                    std::uint64_t index = 0) {
  return std::mt19937_64(derive_seed(base_seed, key, stream, index));
}

}  // namespace reflectrm
