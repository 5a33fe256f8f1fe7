#ifndef DTUQ_RNG_HPP
#define DTUQ_RNG_HPP

#include <array>
#include <cstdint>
#include <limits>

namespace dtuq {

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t& state) noexcept {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
  return (x << k) | (x >> (64 - k));
}

// Mixes a (seed, index) pair into a single 64-bit key.
constexpr std::uint64_t mix_key(std::uint64_t seed, std::uint64_t index) noexcept {
  std::uint64_t s = seed;
  std::uint64_t a = splitmix64(s);
  std::uint64_t t = index ^ 0xD1B54A32D192ED03ULL;
  std::uint64_t b = splitmix64(t);
  std::uint64_t u = a ^ rotl(b, 23);
  return splitmix64(u);
}

}  // namespace detail

/**
 * Deterministic random stream identified by (master_seed, stream_index).
 *
 * Generator is xoshiro256** whose state is expanded by SplitMix64 from a
 * hash of the identity pair, so equal identities replay equal sequences and
 * distinct indices give decorrelated streams. Streams are cheap value types:
 * derive one per task with substream() instead of sharing one across threads.
 */
class RngStream {
 public:
  using result_type = std::uint64_t;

  RngStream(std::uint64_t master_seed, std::uint64_t stream_index) noexcept
      : master_seed_(master_seed), stream_index_(stream_index) {
    std::uint64_t sm = detail::mix_key(master_seed, stream_index);
    for (auto& word : state_) word = detail::splitmix64(sm);
  }

  std::uint64_t master_seed() const noexcept { return master_seed_; }
  std::uint64_t stream_index() const noexcept { return stream_index_; }

  /// Child stream for task `index`, independent of this stream's position.
  RngStream substream(std::uint64_t index) const noexcept {
    return RngStream(detail::mix_key(master_seed_, stream_index_), index);
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() noexcept { return next_u64(); }

  std::uint64_t next_u64() noexcept {
    const std::uint64_t result = detail::rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = detail::rotl(state_[3], 45);
    return result;
  }

  /// Uniform on the open interval (0, 1); never returns 0 or 1.
  double uniform() noexcept {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

 private:
  std::uint64_t master_seed_;
  std::uint64_t stream_index_;
  std::array<std::uint64_t, 4> state_{};
};

}  // namespace dtuq

#endif  // DTUQ_RNG_HPP
