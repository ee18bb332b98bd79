// Deterministic random generator with named sub-streams.
//
// All distributions are implemented on top of the raw 64-bit stream so that
// results are reproducible across platforms and standard-library versions.
#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "rebal/common.hpp"

namespace rebal {

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}
}  // namespace detail

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Derives an independent stream; changing one stage's stream does not
  // perturb the others.
  static Rng substream(std::uint64_t seed, std::string_view name) {
    return Rng(detail::splitmix64(seed ^ fnv1a64(name)));
  }
  static std::uint64_t substream_seed(std::uint64_t seed, std::string_view name) {
    return detail::splitmix64(seed ^ fnv1a64(name));
  }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1).
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform on (0, 1); safe for log transforms.
  double uniform_open01() {
    return (static_cast<double>(next_u64() >> 12) + 0.5) * 0x1.0p-52;
  }

  double uniform(double a, double b) { return a + (b - a) * uniform01(); }

  // Box-Muller, cache-free.
  double normal() {
    double u1 = uniform_open01();
    double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  double gumbel() { return -std::log(-std::log(uniform_open01())); }

  // Standard logistic via inverse CDF.
  double logistic() {
    double u = uniform_open01();
    return std::log(u / (1.0 - u));
  }

  bool bernoulli(double p) { return uniform01() < p; }

  // Uniform integer on [0, n). Lemire multiply-shift; deterministic.
  std::uint64_t uniform_int(std::uint64_t n) {
    if (n == 0) throw Error("uniform_int(0)");
    unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * n;
    return static_cast<std::uint64_t>(m >> 64);
  }

  // Index sampled proportionally to non-negative weights.
  int categorical(std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    if (!(total > 0.0)) throw Error("categorical: non-positive weight total");
    double u = uniform01() * total;
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      acc += weights[i];
      if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(weights.size()) - 1;
  }

  template <typename T>
  void shuffle(std::vector<T>& xs) {
    for (std::size_t i = xs.size(); i > 1; --i) {
      std::size_t j = uniform_int(i);
      std::swap(xs[i - 1], xs[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace rebal
