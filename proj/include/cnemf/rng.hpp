#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <string_view>
#include <vector>

namespace cnemf {

/**
 * Counter-based random number streams.
 *
 * All randomness in the library flows from one root seed through named streams:
 * stream key = (root seed, 64-bit hash of a purpose string), and every draw is a
 * pure function of (key, counter).  Streams are therefore replayable, splittable
 * and safe to consume from parallel workers without coordination.
 */

/// FNV-1a 64-bit hash of a purpose string (stream identifier).
constexpr std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

/// Threefry2x64, 20 rounds: a keyed bijection on 128-bit counters.
struct Threefry2x64 {
  static std::array<std::uint64_t, 2> block(std::array<std::uint64_t, 2> key,
                                            std::array<std::uint64_t, 2> ctr) {
    constexpr std::uint64_t kParity = 0x1BD11BDAA9FC1A22ull;
    constexpr int kRot[8] = {16, 42, 12, 31, 16, 32, 24, 21};
    const std::uint64_t ks[3] = {key[0], key[1], kParity ^ key[0] ^ key[1]};
    std::uint64_t x0 = ctr[0] + ks[0];
    std::uint64_t x1 = ctr[1] + ks[1];
    for (int r = 0; r < 20; ++r) {
      x0 += x1;
      x1 = std::rotl(x1, kRot[r % 8]);
      x1 ^= x0;
      if ((r + 1) % 4 == 0) {
        const int s = (r + 1) / 4;
        x0 += ks[s % 3];
        x1 += ks[(s + 1) % 3] + static_cast<std::uint64_t>(s);
      }
    }
    return {x0, x1};
  }
};

/**
 * One named stream.  Successive calls consume successive counter values; the
 * (seed, purpose, counter) triple fully determines every output.
 */
class RngStream {
 public:
  RngStream(std::uint64_t root_seed, std::string_view purpose, std::uint64_t ctr_hi = 0)
      : key_{root_seed, fnv1a64(purpose)}, hi_(ctr_hi), lo_(0) {}

  /// Next raw 64-bit word.
  std::uint64_t u64() {
    const auto out = Threefry2x64::block(key_, {hi_, lo_++});
    return out[0];
  }

  /// Uniform double in [0,1) with 53 random bits.
  double uniform01() { return static_cast<double>(u64() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n) by rejection (exact, unbiased).
  std::uint64_t uniform_int(std::uint64_t n) {
    const std::uint64_t limit = n * ((~std::uint64_t{0}) / n);
    std::uint64_t v = u64();
    while (v >= limit) v = u64();
    return v % n;
  }

  /// Sample an index from a probability vector by inverse CDF on one uniform.
  int sample_pmf(const std::vector<double>& pmf) { return invert_cdf(pmf, uniform01()); }

  /// Inverse-CDF rule shared by every sampler in the library: smallest index a
  /// with z < pmf[0] + ... + pmf[a].  Deterministic given z.
  static int invert_cdf(const std::vector<double>& pmf, double z) {
    double cum = 0.0;
    for (std::size_t a = 0; a < pmf.size(); ++a) {
      cum += pmf[a];
      if (z < cum) return static_cast<int>(a);
    }
    return static_cast<int>(pmf.size()) - 1;  // absorbs z ~ 1 vs rounded CDF
  }

 private:
  std::array<std::uint64_t, 2> key_;
  std::uint64_t hi_;
  std::uint64_t lo_;
};

}  // namespace cnemf
