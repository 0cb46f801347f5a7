#pragma once

#include <cstdint>
#include <random>

namespace gum {

// Deterministic uniform generator. All randomness in the library flows through
// this wrapper so that results are bit-reproducible across platforms: the raw
// mt19937_64 sequence is fully specified by the standard, and doubles are made
// from the top 53 bits directly instead of going through the
// implementation-defined std::uniform_real_distribution.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  // Substream for replication `stream` of master seed `master`. seed_seq's
  // mixing is standard-specified, so substreams are identical everywhere and
  // effectively independent of one another.
  Rng(std::uint64_t master, std::uint64_t stream)
      : eng_(make_seq(master, stream)) {}

  std::uint64_t raw() { return eng_(); }

  // Uniform on [0, 1): 53-bit mantissa, never returns 1.
  double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n), unbiased via rejection.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = eng_();
    } while (x >= limit);
    return x % n;
  }

 private:
  static std::mt19937_64 make_seq(std::uint64_t master, std::uint64_t stream) {
    std::seed_seq seq{
        static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32),
        static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    return std::mt19937_64(seq);
  }

  std::mt19937_64 eng_;
};

}  // namespace gum
