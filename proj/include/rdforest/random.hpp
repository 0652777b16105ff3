#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <vector>

namespace rdforest {

/// SplitMix64 finalizer. Used to turn structured keys (master seed, chunk,
/// tree, replication, ...) into well-mixed, independent stream seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives a child seed from a parent seed and an ordered list of keys.
/// derive_seed(s, {a, b}) != derive_seed(s, {b, a}) in general.
constexpr std::uint64_t derive_seed(std::uint64_t parent,
                                    std::initializer_list<std::uint64_t> keys) noexcept {
  std::uint64_t h = splitmix64(parent ^ 0x6a09e667f3bcc909ULL);
  for (std::uint64_t k : keys) h = splitmix64(h ^ splitmix64(k + 0x3c6ef372fe94f82bULL));
  return h;
}

/// Portable random stream. The engine is std::mt19937_64, whose output
/// sequence is fixed by the standard; all distributions are implemented here
/// (not via <random> distributions, whose algorithms are implementation
/// defined) so draws reproduce bit-for-bit across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 bits of resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform on (0, 1].
  double uniform_open_zero() { return 1.0 - uniform(); }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Unbiased integer in [0, n).
  std::uint64_t index(std::uint64_t n);

  /// Standard normal via the Marsaglia polar method.
  double normal();

  /// Gamma(shape, 1) by Marsaglia-Tsang; shape < 1 goes through
  /// G(shape + 1) * U^{1/shape}.
  double gamma(double shape);

  /// Beta(a, b) as the ratio G_a / (G_a + G_b) of independent gammas.
  double beta(double a, double b);

  bool bernoulli(double p) { return uniform() < p; }

  /// Draws k distinct elements of `pool` uniformly (partial Fisher-Yates on a
  /// copy). Order of the result is the draw order.
  std::vector<std::uint32_t> sample_without_replacement(std::span<const std::uint32_t> pool,
                                                        std::size_t k);

 private:
  std::mt19937_64 engine_;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace rdforest
