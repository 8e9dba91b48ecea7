#pragma once

#include <cstddef>
#include <cstdint>

namespace dta {

// splitmix64. Used wherever output must be reproducible across platforms
// (the standard distributions are implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // uniform in [0, 1)
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  std::size_t below(std::size_t n) { return static_cast<std::size_t>(next() % n); }

  bool chance(double p) { return uniform() < p; }

  template <typename It>
  void shuffle(It first, It last) {
    for (auto n = last - first; n > 1; --n) {
      auto j = static_cast<decltype(n)>(below(static_cast<std::size_t>(n)));
      std::swap(first[n - 1], first[j]);
    }
  }

 private:
  std::uint64_t state_;
};

}  // namespace dta
