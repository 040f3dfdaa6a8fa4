#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace airmvc {

/// Generator seeded from a list of 64-bit words (seed_seq only keeps 32 bits per entry).
inline std::mt19937_64 make_rng(std::initializer_list<std::uint64_t> words) {
  std::vector<std::uint32_t> parts;
  parts.reserve(words.size() * 2);
  for (std::uint64_t w : words) {
    parts.push_back(static_cast<std::uint32_t>(w & 0xffffffffu));
    parts.push_back(static_cast<std::uint32_t>(w >> 32));
  }
  std::seed_seq seq(parts.begin(), parts.end());
  return std::mt19937_64(seq);
}

}  // namespace airmvc
