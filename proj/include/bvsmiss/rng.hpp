#pragma once

#include <cstdint>
#include <random>

#include <boost/random/chi_squared_distribution.hpp>
#include <boost/random/gamma_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>
#include <boost/random/uniform_int_distribution.hpp>

namespace bvsmiss {

/// Seeded random stream. The engine is std::mt19937_64 and the
/// distributions come from boost, whose algorithms are fixed across
/// platforms, so identical seeds give bit-identical output everywhere.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double normal() { return boost::random::normal_distribution<double>()(engine_); }
  double uniform() { return boost::random::uniform_01<double>()(engine_); }
  double chi_squared(double df) {
    return boost::random::chi_squared_distribution<double>(df)(engine_);
  }
  // Gamma with the given shape and rate (mean shape / rate).
  double gamma(double shape, double rate) {
    return boost::random::gamma_distribution<double>(shape, 1.0 / rate)(engine_);
  }
  std::size_t index(std::size_t n) {
    return boost::random::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }
  bool bernoulli(double prob) { return uniform() < prob; }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Child seed for (seed, tag); used for per-model and per-chain streams.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
  return splitmix64(splitmix64(seed) ^ splitmix64(tag + 0x632be59bd9b4e019ULL));
}

}  // namespace bvsmiss
