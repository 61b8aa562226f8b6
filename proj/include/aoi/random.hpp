#pragma once

#include <cmath>
#include <cstdint>

namespace aoi::rng {

namespace detail {

// splitmix64 finalizer; also used to hash stream coordinates together.
inline std::uint64_t mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace detail

enum class Purpose : std::uint64_t { Arrival = 1, Service = 2, Backoff = 3 };

/// One independent splitmix64 stream keyed by (scenario seed, link index,
/// purpose). Every link draws arrivals, services, and back-offs from its own
/// streams, so adding a link leaves the others' sample paths untouched.
class Stream {
 public:
  Stream() = default;
  Stream(std::uint64_t seed, std::uint64_t link, Purpose purpose) {
    state_ = detail::mix(seed + 0x9e3779b97f4a7c15ULL * (link + 1));
    state_ = detail::mix(state_ + 0xd1342543de82ef95ULL *
                                      static_cast<std::uint64_t>(purpose));
  }

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return detail::mix(state_);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Exponential variate by inversion; never returns inf.
  double exponential(double rate) { return -std::log1p(-uniform01()) / rate; }

  /// Uniform integer in {0, ..., n - 1}. Bias is below 1 part in 2^53 / n.
  int uniform_int(int n) {
    const int v = static_cast<int>(uniform01() * n);
    return v < n ? v : n - 1;
  }

 private:
  std::uint64_t state_ = 0;
};

}  // namespace aoi::rng
