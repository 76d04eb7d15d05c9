#include "n3map/morton.hpp"

#include <stdexcept>
#include <string>

namespace n3map {

uint64_t morton_encode(int64_t x, int64_t y, int64_t z) {
  for (int64_t c : {x, y, z}) {
    if (c <= -kMortonCoordLimit || c >= kMortonCoordLimit)
      throw std::out_of_range("morton_encode: coordinate " + std::to_string(c) + " outside (-2^20, 2^20)");
  }
  return morton_encode_unchecked(x, y, z);
}

}  // namespace n3map
