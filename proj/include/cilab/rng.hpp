#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace cilab {

// splitmix64 step; used for seed mixing so that nearby seeds give
// unrelated streams.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Deterministic sub-stream seed: mix the parent seed with a stream tag.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
  return mix64(mix64(seed) + tag);
}

// Self-contained random source. mt19937_64 core with explicit
// transformations on top, so draws are reproducible across platforms and
// standard library versions (std::normal_distribution is not portable).
class RandomSource {
 public:
  explicit RandomSource(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller. The cosine draw is returned first,
  // the sine draw is cached for the next call. u1 is shifted into (0, 1]
  // so log never sees zero.
  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 =
        (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  // Uniform index in [0, bound) by 128-bit multiply (Lemire). The modulo
  // bias is below 2^-64 and the draw count is deterministic, which matters
  // more here than exactness.
  std::uint64_t uniform_index(std::uint64_t bound) {
    const unsigned __int128 m =
        static_cast<unsigned __int128>(next_u64()) * bound;
    return static_cast<std::uint64_t>(m >> 64);
  }

  // Independent child stream; `tag` names the purpose of the stream.
  RandomSource fork(std::uint64_t tag) const {
    return RandomSource(derive_seed(seed_, tag));
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace cilab
