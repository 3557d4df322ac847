#pragma once

#include <cstdint>

namespace nrm {

/// Independent per-component seed from one root seed (splitmix64 finalizer).
constexpr std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream) noexcept {
  std::uint64_t z = root + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Streams handed out by derive_seed; one per randomized component.
enum SeedStream : std::uint64_t {
  kWeightsStream = 1,
  kEnvironmentStream = 2,
  kExplorationStream = 3,
  kGrounderStream = 4,
  kDataStream = 5,
};

} // namespace nrm
