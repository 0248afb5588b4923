#pragma once

#include <cstdint>
#include <random>

namespace ceq {

/// Identifies an independent pseudo-random substream: the same (seed, stream)
/// pair always produces the same sequence.
struct RngStream {
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;

  std::mt19937_64 engine() const {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                      0x43455121u};
    return std::mt19937_64(seq);
  }

  RngStream child(std::uint64_t id) const { return {seed ^ (stream * 0x9E3779B97F4A7C15ull), id + 1}; }
};

}  // namespace ceq
