#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "lsat/types.hpp"

namespace lsat {

// SplitMix64 (Steele/Lea/Flood, public domain): a counter-based generator.
// State advances by the 64-bit golden-ratio increment and the output is a
// finalizer hash of the counter, so equal seeds give equal sequences on
// every platform. Reference constants:
//   increment 0x9E3779B97F4A7C15
//   mix       z ^= z>>30; z *= 0xBF58476D1CE4E5B9;
//             z ^= z>>27; z *= 0x94D049BB133111EB;
//             z ^= z>>31
// Standard-library engines are deliberately not used anywhere in this
// project; every random draw flows through this class.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed) : state_(seed), seed_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform on [0, 1): top 53 bits scaled by 2^-53.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Unbiased draw from [0, bound) by rejection.
  std::uint64_t next_below(std::uint64_t bound);

  // Standard normal via Box-Muller; consumes exactly two draws.
  double next_gaussian();

  Matrix gaussian_matrix(Index rows, Index cols, double stddev);

  template <typename T>
  void shuffle(std::vector<T>& values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(next_below(i));
      std::swap(values[i - 1], values[j]);
    }
  }

 private:
  std::uint64_t state_ = 0;
  std::uint64_t seed_ = 0;
};

// Derives an independent sub-stream seed from a root seed and a label
// (FNV-1a over the label folded into the root). Stage names like
// "data", "pretrain" or "adapter/p1-10" keep the streams of different
// pipeline stages decoupled.
std::uint64_t derive_seed(std::uint64_t root, std::string_view label);

}  // namespace lsat
