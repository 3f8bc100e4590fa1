#pragma once

// Seeded random streams.
//
// Every consumer of randomness owns a named stream derived from the master
// seed, so replacing or toggling one component never shifts the draws seen
// by another. The engine is SplitMix64: one 64-bit word of state, which
// makes streams trivially checkpointable and lets the embedding regenerate
// any matrix row from (seed, row) alone.

#include <cstdint>
#include <limits>
#include <string_view>

#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_real_distribution.hpp>

namespace pesaerl {

/// Finalizer of SplitMix64; a bijective 64-bit mixer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// SplitMix64 as a UniformRandomBitGenerator.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  constexpr SplitMix64() noexcept = default;
  constexpr explicit SplitMix64(std::uint64_t state) noexcept : state_(state) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  constexpr result_type operator()() noexcept {
    state_ += kGamma;
    return mix64(state_);
  }

  constexpr std::uint64_t state() const noexcept { return state_; }
  constexpr void set_state(std::uint64_t s) noexcept { state_ = s; }

  friend constexpr bool operator==(const SplitMix64&, const SplitMix64&) = default;

 private:
  static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;
  std::uint64_t state_ = 0;
};

constexpr std::uint64_t fnv1a(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Seed for the stream `tag`/`index` under `master`.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::string_view tag,
                                    std::uint64_t index = 0) noexcept {
  return mix64(mix64(master ^ mix64(fnv1a(tag))) + mix64(index + 0x632be59bd9b4e019ULL));
}

constexpr SplitMix64 make_stream(std::uint64_t master, std::string_view tag,
                                 std::uint64_t index = 0) noexcept {
  return SplitMix64(derive_seed(master, tag, index));
}

/// Standard normal variate (ziggurat).
inline double standard_normal(SplitMix64& rng) {
  boost::random::normal_distribution<double> nd(0.0, 1.0);
  return nd(rng);
}

inline double uniform_real(SplitMix64& rng, double low, double high) {
  boost::random::uniform_real_distribution<double> ud(low, high);
  return ud(rng);
}

/// Index in [0, n) from exactly one 64-bit draw (multiply-shift).
inline std::size_t uniform_index(SplitMix64& rng, std::size_t n) {
  const unsigned __int128 wide =
      static_cast<unsigned __int128>(rng()) * static_cast<unsigned __int128>(n);
  return static_cast<std::size_t>(wide >> 64);
}

}  // namespace pesaerl
