#pragma once

#include <cstdint>
#include <random>

namespace episcan {

using Engine = std::mt19937_64;

// Engine for replicate `index` of the experiment identified by `seed`.
// Each (seed, stream, index) triple gets its own independently seeded engine,
// so replicates can be generated in any order and on any thread.
inline Engine replicate_engine(std::uint64_t seed, std::uint64_t index,
                               std::uint32_t stream = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32), stream};
  return Engine(seq);
}

// Stream tags keep the bridge simulation and the data simulation apart even
// when they share a seed.
inline constexpr std::uint32_t kBridgeStream = 0x42524447;  // "BRDG"
inline constexpr std::uint32_t kDataStream = 0x44415441;    // "DATA"

}  // namespace episcan
