#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "ssir/errors.hpp"

// Counter-derived random streams. Every consumer of randomness in this
// library gets its own stream, keyed on (master seed, domain tag, indices),
// so results do not depend on scheduling order or thread count.

namespace ssir {

// Domain separation tags. Arbitrary odd constants, never reused.
namespace rngtag {
inline constexpr std::uint64_t kStage1 = 0x9b97'11c3'5d03'1b21ULL;
inline constexpr std::uint64_t kStage2 = 0x6a09'e667'f3bc'c909ULL;
inline constexpr std::uint64_t kCoefficients = 0xbb67'ae85'84ca'a73bULL;
inline constexpr std::uint64_t kData = 0x3c6e'f372'fe94'f82bULL;
inline constexpr std::uint64_t kReplicate = 0xa54f'f53a'5f1d'36f1ULL;
inline constexpr std::uint64_t kScenario = 0x510e'527f'ade6'82d1ULL;
}  // namespace rngtag

// splitmix64 finalizer: the standard 64-bit avalanche mix.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e37'79b9'7f4a'7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58'476d'1ce4'e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d0'49bb'1331'11ebULL;
  return z ^ (z >> 31);
}

// Chain-hash a value into a running key.
inline std::uint64_t absorb(std::uint64_t h, std::uint64_t v) {
  return mix64(h ^ (v + 0x9e37'79b9'7f4a'7c15ULL + (h << 6) + (h >> 2)));
}

inline std::uint64_t derive_key(std::uint64_t master, std::uint64_t tag) {
  return absorb(absorb(mix64(master), tag), 0x1);
}
inline std::uint64_t derive_key(std::uint64_t master, std::uint64_t tag,
                                std::uint64_t i) {
  return absorb(derive_key(master, tag), i);
}
inline std::uint64_t derive_key(std::uint64_t master, std::uint64_t tag,
                                std::uint64_t i, std::uint64_t j) {
  return absorb(derive_key(master, tag, i), j);
}

// xoshiro256** seeded through splitmix64. Small, fast, and good enough to
// pass the usual statistical batteries; we only need subset draws and
// Gaussian noise out of it.
class RngStream {
 public:
  RngStream() : RngStream(0) {}

  explicit RngStream(std::uint64_t key) {
    std::uint64_t s = key;
    for (auto& w : state_) {
      s += 0x9e37'79b9'7f4a'7c15ULL;
      w = mix64(s);
    }
    have_cached_normal_ = false;
    cached_normal_ = 0.0;
  }

  static RngStream from_key(std::uint64_t key) { return RngStream(key); }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform on [0, 1), 53 random bits.
  double next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform integer in [0, n). Lemire's multiply-with-rejection, no modulo
  // bias, deterministic for a fixed stream.
  std::uint64_t next_below(std::uint64_t n) {
    using u128 = unsigned __int128;
    std::uint64_t x = next_u64();
    u128 m = static_cast<u128>(x) * static_cast<u128>(n);
    auto lo = static_cast<std::uint64_t>(m);
    if (lo < n) {
      const std::uint64_t threshold = (0 - n) % n;
      while (lo < threshold) {
        x = next_u64();
        m = static_cast<u128>(x) * static_cast<u128>(n);
        lo = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  // Standard normal via Box-Muller; caches the second draw.
  double next_normal() {
    if (have_cached_normal_) {
      have_cached_normal_ = false;
      return cached_normal_;
    }
    // u1 in (0, 1] so the log is finite.
    const double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = next_unit();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    cached_normal_ = r * std::sin(a);
    have_cached_normal_ = true;
    return r * std::cos(a);
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::array<std::uint64_t, 4> state_;
  double cached_normal_;
  bool have_cached_normal_;
};

// k distinct indices from {0, ..., p-1}, uniform over all k-subsets,
// returned sorted ascending. Floyd's algorithm: k draws regardless of p.
inline std::vector<int> sample_subset(RngStream& stream, int p, int k) {
  if (p < 1 || k < 1 || k > p) {
    throw InvalidArgument("sample_subset: need 1 <= k <= p");
  }
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(k));
  for (int j = p - k; j < p; ++j) {
    const int t = static_cast<int>(stream.next_below(static_cast<std::uint64_t>(j) + 1));
    if (std::find(out.begin(), out.end(), t) != out.end()) {
      out.push_back(j);
    } else {
      out.push_back(t);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

// In-place variant for hot loops; keeps the caller's buffer.
inline void sample_subset_into(RngStream& stream, int p, int k,
                               std::vector<int>& out) {
  out.clear();
  for (int j = p - k; j < p; ++j) {
    const int t = static_cast<int>(stream.next_below(static_cast<std::uint64_t>(j) + 1));
    if (std::find(out.begin(), out.end(), t) != out.end()) {
      out.push_back(j);
    } else {
      out.push_back(t);
    }
  }
  std::sort(out.begin(), out.end());
}

}  // namespace ssir
