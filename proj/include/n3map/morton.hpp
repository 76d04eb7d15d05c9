#pragma once

#include <cstdint>

#include "n3map/types.hpp"

// 64-bit Morton codes over signed voxel coordinates. Each axis is stored as a
// 21-bit two's-complement field and bit-interleaved with x in the least
// significant position of every triple, so (1,0,0) -> 1, (0,1,0) -> 2,
// (0,0,1) -> 4.
namespace n3map {

inline constexpr int kMortonAxisBits = 21;
inline constexpr int64_t kMortonCoordLimit = int64_t{1} << 20;  // |coord| < limit

struct MortonKey {
  uint64_t code = 0;
  uint8_t level = 0;  // 0 = leaf

  friend bool operator==(const MortonKey&, const MortonKey&) = default;
};

namespace detail {

inline uint64_t spread_bits(uint64_t v) {
  v &= 0x1fffff;
  v = (v | v << 32) & 0x1f00000000ffffULL;
  v = (v | v << 16) & 0x1f0000ff0000ffULL;
  v = (v | v << 8) & 0x100f00f00f00f00fULL;
  v = (v | v << 4) & 0x10c30c30c30c30c3ULL;
  v = (v | v << 2) & 0x1249249249249249ULL;
  return v;
}

inline uint64_t compact_bits(uint64_t v) {
  v &= 0x1249249249249249ULL;
  v = (v ^ (v >> 2)) & 0x10c30c30c30c30c3ULL;
  v = (v ^ (v >> 4)) & 0x100f00f00f00f00fULL;
  v = (v ^ (v >> 8)) & 0x1f0000ff0000ffULL;
  v = (v ^ (v >> 16)) & 0x1f00000000ffffULL;
  v = (v ^ (v >> 32)) & 0x1fffffULL;
  return v;
}

inline int64_t sign_extend21(uint64_t v) {
  return (v & 0x100000) ? static_cast<int64_t>(v) - (int64_t{1} << 21) : static_cast<int64_t>(v);
}

}  // namespace detail

// Unchecked encode for hot paths; callers guarantee the coordinate range.
inline uint64_t morton_encode_unchecked(int64_t x, int64_t y, int64_t z) {
  return detail::spread_bits(static_cast<uint64_t>(x)) | detail::spread_bits(static_cast<uint64_t>(y)) << 1 |
         detail::spread_bits(static_cast<uint64_t>(z)) << 2;
}

// Throws std::out_of_range when any |coordinate| >= 2^20.
uint64_t morton_encode(int64_t x, int64_t y, int64_t z);
inline uint64_t morton_encode(const Vec3i& c) { return morton_encode(c.x(), c.y(), c.z()); }

inline Vec3i morton_decode(uint64_t code) {
  return {detail::sign_extend21(detail::compact_bits(code)), detail::sign_extend21(detail::compact_bits(code >> 1)),
          detail::sign_extend21(detail::compact_bits(code >> 2))};
}

}  // namespace n3map
