#pragma once
// Deterministic randomness. The engine is std::mt19937_64, whose state
// evolution is pinned by the standard; every transform to uniforms, integer
// ranges, permutations and weighted picks is implemented here so no result
// depends on unspecified library distribution internals. Rng is a value type:
// copying it forks the stream reproducibly.

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "graphss/error.hpp"

namespace graphss {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform double in [0, 1) with 53 random bits.
  double next_unit() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Unbiased uniform integer in [0, n); rejection on the top of the range.
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) throw ValidationError("Rng::below requires n > 0");
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  bool bernoulli(double p) { return next_unit() < p; }

  // Index i with probability weights[i] / sum(weights). Weights must be
  // nonnegative, finite, with a positive sum.
  int pick_weighted(std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights) {
      if (!(w >= 0.0) || !std::isfinite(w))
        throw RuntimeFailure("pick_weighted: invalid weight");
      total += w;
    }
    if (total <= 0.0) throw RuntimeFailure("pick_weighted: all weights zero");
    const double u = next_unit() * total;
    double acc = 0.0;
    int last_positive = -1;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (weights[i] > 0.0) last_positive = static_cast<int>(i);
      acc += weights[i];
      if (u < acc && weights[i] > 0.0) return static_cast<int>(i);
    }
    return last_positive;  // u landed on the fp boundary
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {  // Fisher-Yates
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

namespace detail {

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

}  // namespace detail

// Child stream derivation: seed = splitmix64(splitmix64(master ^ fnv1a(role)) + index).
// Role strings keep streams for different purposes (noise, partition, attack,
// inference, ...) independent even under equal master seeds.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view role,
                                 std::uint64_t index = 0) {
  return detail::splitmix64(detail::splitmix64(master ^ detail::fnv1a64(role)) + index);
}

}  // namespace graphss
