#pragma once

#include <cstdint>

namespace ivy {

// splitmix64. Chosen over std::mt19937_64 + distributions because the
// distribution outputs would not be reproducible across standard libraries,
// and reproducibility of every artifact file is a hard requirement here.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Hash-combine used to derive independent seed streams, e.g.
// mix_seed(master_seed, call_index) for the per-call generator.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t s = a ^ (b + 0x9E3779B97F4A7C15ULL + (a << 6) + (a >> 2));
  return splitmix64(s);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : state_(seed) {}

  std::uint64_t next_u64() { return splitmix64(state_); }

  // Uniform in [0, 1).
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n), n > 0.
  std::uint32_t uniform_int(std::uint32_t n) {
    return std::uint32_t(next_u64() % n);
  }

  // Sum of n Bernoulli(p) draws. n stays small here (packets per tick).
  int binomial(int n, double p) {
    if (p <= 0.0 || n <= 0) return 0;
    if (p >= 1.0) return n;
    int k = 0;
    for (int i = 0; i < n; ++i)
      if (uniform() < p) ++k;
    return k;
  }

 private:
  std::uint64_t state_;
};

}  // namespace ivy
