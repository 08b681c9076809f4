// Counter-based random number generation.
//
// Every draw is a pure function of a StreamKey, so results are independent
// of thread scheduling and call order. Distinct (seed, particle, channel,
// index) tuples give statistically independent draws.
#pragma once

#include <cmath>
#include <cstdint>

namespace mkv {

// Channel kinds, packed into the top byte of StreamKey::channel.
enum class StreamKind : std::uint64_t {
  brownian = 0,    // sub = step index, draw = component
  jump_count = 1,  // one draw per particle
  jump_time = 2,   // draw = jump index
  jump_mark = 3,   // draw = jump index (times components)
  initial = 4,     // draw = component
};

struct StreamKey {
  std::uint64_t seed = 0;
  std::uint64_t particle = 0;
  std::uint64_t channel = 0;
  std::uint64_t draw_index = 0;

  static constexpr std::uint64_t make_channel(StreamKind kind,
                                              std::uint64_t sub = 0) {
    return (static_cast<std::uint64_t>(kind) << 56) | (sub & 0x00FFFFFFFFFFFFFFull);
  }
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

}  // namespace detail

// 64-bit hash of the full key. Chained splitmix64 over the four words.
inline std::uint64_t key_hash(const StreamKey& k) {
  std::uint64_t h = detail::splitmix64(k.seed);
  h = detail::splitmix64(h ^ k.particle);
  h = detail::splitmix64(h ^ k.channel);
  h = detail::splitmix64(h ^ k.draw_index);
  // extra mixing round so adjacent keys decorrelate
  return detail::splitmix64(h ^ 0xD1B54A32D192ED03ull);
}

// Uniform draw in the open interval (0, 1).
inline double key_uniform(const StreamKey& k) {
  const std::uint64_t bits = key_hash(k);
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

// Standard normal draw via Box-Muller. Consumes two sub-draws derived from
// the key's draw_index, so callers may use consecutive draw indices freely.
inline double key_normal(const StreamKey& k) {
  StreamKey a = k;
  a.draw_index = 2 * k.draw_index;
  StreamKey b = k;
  b.draw_index = 2 * k.draw_index + 1;
  const double u1 = key_uniform(a);
  const double u2 = key_uniform(b);
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * 3.14159265358979323846 * u2);
}

// Poisson draw by inversion (sequential search). Suitable for the finite
// intensities used here; mean values are O(lambda * T).
inline std::uint64_t key_poisson(const StreamKey& k, double mean) {
  if (mean <= 0.0) return 0;
  const double u = key_uniform(k);
  double p = std::exp(-mean);
  double cdf = p;
  std::uint64_t n = 0;
  // For large means the term underflows at n=0; recurse multiplicatively.
  while (u > cdf && n < 100000) {
    ++n;
    p *= mean / static_cast<double>(n);
    cdf += p;
  }
  return n;
}

}  // namespace mkv
