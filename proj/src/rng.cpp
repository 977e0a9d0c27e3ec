#include "reflectrm/rng.hpp"

namespace reflectrm {

std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t derive_seed(std::uint64_t base_seed, std::string_view key, RngStream stream, std::uint64_t index) {
  std::uint64_t state = base_seed;
  std::uint64_t h = splitmix64(state);
  state = h ^ fnv1a64(key);
  h = splitmix64(state);
  state = h ^ static_cast<std::uint64_t>(stream);
  h = splitmix64(state);
  state = h ^ index;
  return splitmix64(state);
}

}  // namespace reflectrm
