#pragma once

// Counter-based random streams.  Every draw is a pure function of
// (root seed, stream label, counter), so sampling is independent of
// evaluation order and thread count.

#include <cstdint>
#include <cmath>
#include <string_view>

namespace kinlab {

namespace detail {

inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace detail

class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::string_view label)
      : key_(detail::mix64(seed ^ detail::fnv1a(label))) {}

  RandomStream sub(std::string_view label) const {
    RandomStream s = *this;
    s.key_ = detail::mix64(key_ ^ detail::fnv1a(label));
    return s;
  }
  RandomStream sub(std::uint64_t n) const {
    RandomStream s = *this;
    s.key_ = detail::mix64(key_ ^ detail::mix64(n ^ 0x5851f42d4c957f2dull));
    return s;
  }

  // uniform in (0,1]
  double uniform(std::uint64_t counter) const {
    std::uint64_t bits = detail::mix64(key_ ^ detail::mix64(counter));
    return ((bits >> 11) + 1.0) * 0x1.0p-53;
  }

  // standard normal, Box-Muller; draw i consumes counters 2i, 2i+1
  double normal(std::uint64_t i) const {
    double u1 = uniform(2 * i), u2 = uniform(2 * i + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  std::uint64_t key() const { return key_; }

 private:
  std::uint64_t key_;
};

}  // namespace kinlab
