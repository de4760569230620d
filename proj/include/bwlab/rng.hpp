#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace bwlab {

// Deterministic random source. All sampling goes through explicit inverse-CDF
// or rejection routines instead of std:: distribution objects, so a given
// (seed, call sequence) produces the same stream on every platform.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  /// Uniform draw in [0, 1).
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  /// Uniform draw in the open interval (0, 1); safe as a quantile argument.
  double uniform_open() {
    return (static_cast<double>(eng_() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Unbiased integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);

  /// Standard normal via inverse CDF.
  double normal();
  double normal(double mean, double sd) { return mean + sd * normal(); }

  /// Gamma(shape, scale) via quantile transform of a uniform draw.
  double gamma(double shape, double scale);

  /// Fisher-Yates permutation of 0..n-1.
  std::vector<std::size_t> permutation(std::size_t n);

  /// Stable substream derivation: mixes a seed with a textual tag.
  static std::uint64_t derive(std::uint64_t seed, std::string_view tag);
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t index);

private:
  std::mt19937_64 eng_;
};

}  // namespace bwlab
