#pragma once

#include <cstdint>
#include <vector>

namespace fairprint {

// Counter-based splittable pseudo-random generator built on the SplitMix64
// finalizer. Every output is a pure function of (key, counter), so streams
// can be evaluated in any order and reproduced in any language:
//
//   mix64(z):        z ^= z >> 30; z *= 0xBF58476D1CE4E5B9;
//                    z ^= z >> 27; z *= 0x94D049BB133111EB; z ^= z >> 31
//   out(key, i)    = mix64(key + (i + 1) * 0x9E3779B97F4A7C15)
//   child(key, i)  = mix64((key ^ 0x6A09E667F3BCC909) + (i + 1) * 0xD1B54A32D192ED03)
//
// out(0, 0..3) equals the canonical SplitMix64 sequence for seed 0:
//   e220a8397b1dcdaf 6e789e6aa1b965f4 06c45d188009454f f88bb8a8724c81ec
// child(0, 0) = 979bcad0c5a6db79, child(0, 1) = d9977c03762a5b1b,
// child(42, 7) = 13b98c03a8c58f0a.
//
// Bounded draws use 128-bit multiply-shift: below(n) = (out * n) >> 64.
// Unit-interval draws use the top 53 bits: [0,1) = (out >> 11) * 2^-53,
// (0,1) = ((out >> 11) + 0.5) * 2^-53.
class Rng {
 public:
  explicit Rng(std::uint64_t key) : key_(key) {}

  std::uint64_t key() const { return key_; }

  std::uint64_t next_u64() {
    return at(counter_++);
  }

  // i-th output of this stream, independent of the cursor.
  std::uint64_t at(std::uint64_t i) const {
    return mix64(key_ + (i + 1) * kGamma);
  }

  // Independent child stream; used for per-replicate and per-group streams.
  Rng child(std::uint64_t i) const {
    return Rng(mix64((key_ ^ kChildSalt) + (i + 1) * kChildGamma));
  }

  // Uniform in [0, n). n must be >= 1.
  std::uint64_t below(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  // Uniform double in [0, 1).
  double unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform double in (0, 1), safe for inverse-CDF sampling.
  double unit_open() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  static std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

 private:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;
  static constexpr std::uint64_t kChildGamma = 0xD1B54A32D192ED03ULL;
  static constexpr std::uint64_t kChildSalt = 0x6A09E667F3BCC909ULL;

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

// Fisher-Yates shuffle, iterating from the back.
template <typename T>
void shuffle(std::vector<T>& items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::uint64_t j = rng.below(i);
    std::swap(items[i - 1], items[j]);
  }
}

// Partial Fisher-Yates: deterministically selects k of n items (order is
// part of the draw, so the first n_mates of a cohort sample are the mates).
template <typename T>
std::vector<T> sample_without_replacement(std::vector<T> items, std::size_t k, Rng& rng) {
  if (k > items.size()) k = items.size();
  for (std::size_t i = 0; i < k; ++i) {
    const std::uint64_t j = i + rng.below(items.size() - i);
    std::swap(items[i], items[j]);
  }
  items.resize(k);
  return items;
}

}  // namespace fairprint
