#pragma once

#include <array>
#include <cstdint>

namespace greedyreg {

// xoshiro256++ with splitmix64 seeding.  We carry our own generator instead
// of <random> distributions so that streams are identical across standard
// library implementations and across worker counts: every replication owns
// a stream derived from (master seed, stream id, index).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t x = seed;
    for (auto& si : s_) si = splitmix(x);
  }

  std::uint64_t next() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform on [0,1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // +1 with probability prob_plus, else -1.
  double sign_pm(double prob_plus) { return uniform() < prob_plus ? 1.0 : -1.0; }

  std::uint64_t uniform_index(std::uint64_t n) { return n ? next() % n : 0; }

  static std::uint64_t splitmix(std::uint64_t& x) {
    x += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  static std::uint64_t rotl(std::uint64_t v, int k) { return (v << k) | (v >> (64 - k)); }
  std::array<std::uint64_t, 4> s_;
};

// Deterministic stream derivation; stable under any work scheduling.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t index = 0) {
  std::uint64_t x = master;
  (void)Rng::splitmix(x);
  x ^= 0x94d049bb133111ebULL * (stream + 1);
  (void)Rng::splitmix(x);
  x ^= 0xbf58476d1ce4e5b9ULL * (index + 1);
  return Rng::splitmix(x);
}

}  // namespace greedyreg
