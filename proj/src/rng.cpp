#include "lsat/rng.hpp"

#include <cmath>

namespace lsat {

std::uint64_t SeededRng::next_below(std::uint64_t bound) {
  if (bound <= 1) return 0;
  // Reject draws below 2^64 mod bound so the remainder is uniform.
  const std::uint64_t threshold = (0ULL - bound) % bound;
  for (;;) {
    const std::uint64_t r = next_u64();
    if (r >= threshold) return r % bound;
  }
}

double SeededRng::next_gaussian() {
  // u1 in (0, 1] keeps the log finite; u2 in [0, 1).
  const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  const double u2 = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  constexpr double two_pi = 6.283185307179586476925286766559;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
}

Matrix SeededRng::gaussian_matrix(Index rows, Index cols, double stddev) {
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = stddev * next_gaussian();
  return m;
}

std::uint64_t derive_seed(std::uint64_t root, std::string_view label) {
  // FNV-1a 64 over the label, then one SplitMix64 round to decorrelate
  // neighbouring roots.
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : label) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  SeededRng mix(root ^ h);
  return mix.next_u64();
}

}  // namespace lsat
