#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace fkt {

/// Deterministic random source. The engine is std::mt19937_64 (its output
/// stream is fully specified), and every distribution on top of it is
/// implemented here rather than taken from <random>, whose distributions are
/// implementation-defined. Same seed, same draw sequence, on any platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1), 53-bit resolution.
  double uniform();

  /// Uniform in (0, 1]; never returns zero (safe under log()).
  double uniform_pos();

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Unbiased integer in [0, bound) by rejection.
  std::uint64_t uniform_below(std::uint64_t bound);

  /// Standard normal via Box-Muller; the paired value is cached.
  double normal();

  /// Gamma(shape, 1) via Marsaglia-Tsang squeeze (boosted for shape < 1).
  double gamma(double shape);

  /// Beta(a, b) as the two-Gamma ratio X/(X+Y).
  double beta(double a, double b);

  /// Fisher-Yates shuffle of [first, last).
  template <typename It>
  void shuffle(It first, It last) {
    const auto n = static_cast<std::uint64_t>(last - first);
    for (std::uint64_t i = n; i > 1; --i) {
      const auto j = uniform_below(i);
      std::swap(first[i - 1], first[j]);
    }
  }

  /// Derive an independent stream seed from a root seed and a purpose tag,
  /// so e.g. mixup draws never shift the initialization stream.
  static std::uint64_t derive(std::uint64_t seed, std::string_view tag);

 private:
  std::mt19937_64 engine_;
  bool have_cached_normal_ = false;
  double cached_normal_ = 0.0;
};

}  // namespace fkt
