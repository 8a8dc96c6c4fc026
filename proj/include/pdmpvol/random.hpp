#ifndef PDMPVOL_RANDOM_HPP
#define PDMPVOL_RANDOM_HPP

#include <cstdint>
#include <limits>

namespace pdmpvol {

namespace detail {
// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}
}  // namespace detail

// Counter-based 64-bit generator: the n-th output is a pure function of
// (key, n), so the whole state is two integers and streams can be derived
// independently from a seed without sequential splitting.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  constexpr CounterRng() noexcept = default;
  constexpr explicit CounterRng(std::uint64_t key, std::uint64_t counter = 0) noexcept
      : key_(key), counter_(counter) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  constexpr result_type operator()() noexcept {
    ++counter_;
    return detail::mix64(key_ + counter_ * 0x9E3779B97F4A7C15ULL);
  }

  // Uniform on the open interval (0, 1).
  constexpr double uniform() noexcept {
    return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
  }

  constexpr std::uint64_t key() const noexcept { return key_; }
  constexpr std::uint64_t counter() const noexcept { return counter_; }

  friend constexpr bool operator==(const CounterRng&, const CounterRng&) = default;

 private:
  std::uint64_t key_ = 0x853C49E6748FEA9BULL;
  std::uint64_t counter_ = 0;
};

// Stream roles inside one volume estimate.
enum class StreamRole : std::uint64_t {
  sigma0 = 1,
  tuning = 2,
  production = 3,
  sample = 4,
};

// Independent stream derived from (seed, repeat, phase, role).
constexpr CounterRng derive_stream(std::uint64_t seed, std::uint64_t repeat,
                                   std::uint64_t phase = 0,
                                   StreamRole role = StreamRole::production) noexcept {
  std::uint64_t k = detail::mix64(seed ^ 0xD1B54A32D192ED03ULL);
  k = detail::mix64(k ^ (repeat + 0x9E3779B97F4A7C15ULL));
  k = detail::mix64(k ^ (phase * 0xA24BAED4963EE407ULL + 1));
  k = detail::mix64(k ^ (static_cast<std::uint64_t>(role) * 0x9FB21C651E98DF25ULL));
  return CounterRng{k};
}

}  // namespace pdmpvol

#endif  // PDMPVOL_RANDOM_HPP
